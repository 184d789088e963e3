#include "trajsim/domain.hpp"

#include "trajsim/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <tuple>

namespace trajsim {

std::string_view to_string(ActionKind kind) {
    return kind == ActionKind::Inquiry ? "inquiry" : "intervention";
}

ActionKind parse_action_kind(std::string_view text) {
    std::string lowered(text);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lowered == "inquiry") return ActionKind::Inquiry;
    if (lowered == "intervention") return ActionKind::Intervention;
    throw Error(ErrorCode::ParseError, "unknown action kind '" + std::string(text) + "'");
}

std::string canonicalize_code(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (unsigned char c : raw) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    if (out.empty()) throw Error(ErrorCode::EmptyCode, "code is empty after canonicalization");
    return out;
}

LabelOutcome make_label(std::initializer_list<std::string_view> tokens) {
    LabelOutcome label;
    for (auto t : tokens) label.values.insert(canonicalize_code(t));
    return label;
}

namespace {

std::string detail_key(const std::map<std::string, std::string>& detail) {
    std::string key;
    for (const auto& [k, v] : detail) {
        key += k;
        key.push_back('\x1f');
        key += v;
        key.push_back('\x1e');
    }
    return key;
}

std::string outcome_key(const Outcome& o) {
    if (const auto* n = std::get_if<NumericOutcome>(&o)) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "n%a|", n->value);
        return buf + n->unit;
    }
    if (const auto* l = std::get_if<LabelOutcome>(&o)) {
        std::string key = "l";
        for (const auto& v : l->values) {
            key += v;
            key.push_back('\x1f');
        }
        return key;
    }
    return "e";
}

} // namespace

bool canonical_less(const Action& a, const Action& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.code != b.code) return a.code < b.code;
    return detail_key(a.detail) < detail_key(b.detail);
}

void sort_canonical(std::vector<Event>& events) {
    // Outcome breaks ties between identical actions so that any input
    // permutation yields the same order.
    std::stable_sort(events.begin(), events.end(), [](const Event& x, const Event& y) {
        if (canonical_less(x.action, y.action)) return true;
        if (canonical_less(y.action, x.action)) return false;
        if (x.action.display_name != y.action.display_name) return x.action.display_name < y.action.display_name;
        return outcome_key(x.outcome) < outcome_key(y.outcome);
    });
}

void sort_canonical(std::vector<Action>& actions) {
    std::stable_sort(actions.begin(), actions.end(), canonical_less);
}

std::string event_category(const Action& action) {
    if (auto it = action.detail.find("category"); it != action.detail.end() && !it->second.empty())
        return it->second;
    return action.kind == ActionKind::Inquiry ? "lab" : "medication";
}

std::size_t count_events(const Episode& episode) {
    std::size_t n = 0;
    for (const auto& set : episode.timeline) n += set.events.size();
    return n;
}

} // namespace trajsim
