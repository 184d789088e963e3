#include "trajsim/validation.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace trajsim {

namespace {

bool is_canonical(const std::string& code) {
    if (code.empty()) return false;
    try {
        return canonicalize_code(code) == code;
    } catch (...) {
        return false;
    }
}

void check_profile(const StaticProfile& p, std::vector<Violation>& out) {
    if (p.age < 0 || p.age > 130) out.push_back({"profile.age", "age must lie in [0, 130]"});
}

void check_diagnostics(const DiagnosticProfile& d, std::vector<Violation>& out) {
    if (d.primary.content.empty())
        out.push_back({"diagnostics.primary", "primary diagnosis content must be non-empty"});
}

void check_timeline(const std::vector<EventSet>& timeline, std::string_view field,
                    std::vector<Violation>& out) {
    for (std::size_t i = 0; i < timeline.size(); ++i) {
        const auto& set = timeline[i];
        const std::string where = std::string(field) + "[" + std::to_string(i) + "]";
        if (set.timestamp.minutes < 0) out.push_back({where + ".timestamp", "timestamp must be non-negative"});
        if (set.events.empty()) out.push_back({where + ".events", "event set must be non-empty"});
        if (i > 0 && !(timeline[i - 1].timestamp < set.timestamp))
            out.push_back({std::string(field), "strictly increasing"});
        for (const auto& ev : set.events) {
            for (auto& v : validate_event(ev)) out.push_back(std::move(v));
        }
    }
}

void check_units(const std::vector<EventSet>& timeline, std::vector<Violation>& warnings) {
    std::map<std::string, std::string> unit_of;
    for (const auto& set : timeline) {
        for (const auto& ev : set.events) {
            const auto* n = std::get_if<NumericOutcome>(&ev.outcome);
            if (!n) continue;
            auto [it, inserted] = unit_of.emplace(ev.action.code, n->unit);
            if (!inserted && it->second != n->unit) {
                warnings.push_back({"unit:" + ev.action.code,
                                    "analyte reported in units '" + it->second + "' and '" + n->unit + "'"});
                it->second = n->unit;
            }
        }
    }
}

} // namespace

std::vector<Violation> validate_event(const Event& event) {
    std::vector<Violation> out;
    if (!is_canonical(event.action.code))
        out.push_back({"Action.code", "code must be non-empty and canonical ('" + event.action.code + "')"});
    if (event.action.kind == ActionKind::Intervention) {
        if (!is_empty(event.outcome))
            out.push_back({"Event", "intervention must have Empty outcome"});
    } else {
        if (is_empty(event.outcome))
            out.push_back({"Event", "inquiry must have Numeric or Label outcome"});
    }
    if (const auto* n = std::get_if<NumericOutcome>(&event.outcome)) {
        if (!std::isfinite(n->value)) out.push_back({"Outcome.value", "numeric value must be finite"});
    }
    if (const auto* l = std::get_if<LabelOutcome>(&event.outcome)) {
        for (const auto& v : l->values) {
            if (!is_canonical(v)) {
                out.push_back({"Outcome.values", "label token must be non-empty and canonical ('" + v + "')"});
                break;
            }
        }
    }
    return out;
}

ValidationReport validate_episode(const Episode& episode) {
    ValidationReport report;
    auto& out = report.violations;
    if (episode.subject_id.empty()) out.push_back({"subject_id", "must be non-empty"});
    if (episode.admission_id.empty()) out.push_back({"admission_id", "must be non-empty"});
    check_profile(episode.profile, out);
    check_diagnostics(episode.diagnostics, out);
    check_timeline(episode.timeline, "timeline", out);
    if (!std::isfinite(episode.length_of_stay) || episode.length_of_stay < 0.0) {
        out.push_back({"length_of_stay", "must be a finite non-negative number of days"});
    } else if (!episode.timeline.empty()) {
        // One minute of slack absorbs rounding of the stored day count.
        const double last_days = episode.timeline.back().timestamp.days();
        if (episode.length_of_stay + 1.0 / 1440.0 < last_days)
            out.push_back({"length_of_stay", "must cover the last timestamp"});
    }
    check_units(episode.timeline, report.warnings);
    return report;
}

ValidationReport validate_state(const PatientState& state) {
    ValidationReport report;
    auto& out = report.violations;
    check_profile(state.profile, out);
    check_diagnostics(state.diagnostics, out);
    check_timeline(state.history, "history", out);
    for (const auto& set : state.history) {
        if (!(set.timestamp < state.now)) {
            out.push_back({"history", "every history timestamp must precede now"});
            break;
        }
    }
    return report;
}

std::string format_violations(const std::vector<Violation>& violations) {
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i) os << "; ";
        os << violations[i].field << ": " << violations[i].rule;
    }
    return os.str();
}

} // namespace trajsim
