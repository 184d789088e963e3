#pragma once
// Core value types for patient trajectories.
//
// An Episode is one hospitalization: a static profile, a diagnostic profile
// and a chronological list of event sets. A PatientState is the conditioning
// context handed to outcome models at each simulation step.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace trajsim {

// Minutes since admission. Zero is admission time.
struct Timestamp {
    std::int64_t minutes = 0;

    constexpr auto operator<=>(const Timestamp&) const = default;

    constexpr double days() const { return static_cast<double>(minutes) / 1440.0; }
    constexpr double hours() const { return static_cast<double>(minutes) / 60.0; }
};

struct StaticProfile {
    int age = 0;
    std::string gender;
    std::string allergies;
    std::string chief_complaint;
    std::string history_summary;

    bool operator==(const StaticProfile&) const = default;
};

struct Diagnosis {
    std::string content;
    std::string reason;

    bool operator==(const Diagnosis&) const = default;
};

struct DiagnosticProfile {
    Diagnosis primary;
    std::vector<Diagnosis> secondary;  // source order

    bool operator==(const DiagnosticProfile&) const = default;
};

enum class ActionKind { Inquiry, Intervention };

std::string_view to_string(ActionKind kind);
ActionKind parse_action_kind(std::string_view text);

struct Action {
    ActionKind kind = ActionKind::Inquiry;
    std::string code;          // canonical token
    std::string display_name;
    std::map<std::string, std::string> detail;  // dose, route, specimen, category

    bool operator==(const Action&) const = default;
};

struct NumericOutcome {
    double value = 0.0;
    std::string unit;

    bool operator==(const NumericOutcome&) const = default;
};

struct LabelOutcome {
    std::set<std::string> values;

    bool operator==(const LabelOutcome&) const = default;
};

struct EmptyOutcome {
    bool operator==(const EmptyOutcome&) const = default;
};

using Outcome = std::variant<EmptyOutcome, NumericOutcome, LabelOutcome>;

inline bool is_empty(const Outcome& o) { return std::holds_alternative<EmptyOutcome>(o); }
inline bool is_numeric(const Outcome& o) { return std::holds_alternative<NumericOutcome>(o); }
inline bool is_label(const Outcome& o) { return std::holds_alternative<LabelOutcome>(o); }

struct Event {
    Action action;
    Outcome outcome;

    bool operator==(const Event&) const = default;
};

struct EventSet {
    Timestamp timestamp;
    std::vector<Event> events;

    bool operator==(const EventSet&) const = default;
};

struct PatientState {
    Timestamp now;
    StaticProfile profile;
    DiagnosticProfile diagnostics;
    std::vector<EventSet> history;

    bool operator==(const PatientState&) const = default;
};

struct Episode {
    std::string subject_id;
    std::string admission_id;
    StaticProfile profile;
    DiagnosticProfile diagnostics;
    std::vector<EventSet> timeline;
    double length_of_stay = 0.0;  // days

    bool operator==(const Episode&) const = default;
};

// Trimmed, case-folded, internal whitespace collapsed. Throws
// Error(EmptyCode) when nothing is left.
std::string canonicalize_code(std::string_view raw);

// Builds a label outcome from raw tokens, canonicalizing each one.
LabelOutcome make_label(std::initializer_list<std::string_view> tokens);

// Ordering key used for canonical event order within a set:
// kind, then code, then serialized detail.
bool canonical_less(const Action& a, const Action& b);

void sort_canonical(std::vector<Event>& events);
void sort_canonical(std::vector<Action>& actions);

// Coarse category used by corpus statistics and filtering. Reads
// detail["category"] when present, otherwise lab for inquiries and
// medication for interventions.
std::string event_category(const Action& action);

std::size_t count_events(const Episode& episode);

} // namespace trajsim
