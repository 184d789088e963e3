#pragma once

#include "trajsim/domain.hpp"

#include <string>
#include <vector>

namespace trajsim {

struct Violation {
    std::string field;
    std::string rule;

    bool operator==(const Violation&) const = default;
};

struct ValidationReport {
    std::vector<Violation> violations;
    // Non-fatal observations, e.g. one analyte reported in two units.
    std::vector<Violation> warnings;

    bool ok() const { return violations.empty(); }
};

ValidationReport validate_episode(const Episode& episode);

// Invariants of a conditioning state: history strictly increasing and
// strictly before `now`.
ValidationReport validate_state(const PatientState& state);

// Checks kind/outcome coupling and finiteness for a single event.
std::vector<Violation> validate_event(const Event& event);

std::string format_violations(const std::vector<Violation>& violations);

} // namespace trajsim
