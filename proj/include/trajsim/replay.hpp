#pragma once

#include "trajsim/outcome_model.hpp"

#include <vector>

namespace trajsim {

// Returns the outcomes recorded in `source` at state.now for the given
// actions, index-aligned. Throws Error(PositionNotFound).
std::vector<Outcome> replay_predict(const Episode& source, const PatientState& state, std::span<const Action> actions);

// Ground-truth playback. With several source episodes, the one whose profile
// and diagnostics equal the state's is used.
class ReplayBackend final : public OutcomeModel {
public:
    ReplayBackend(std::string id, std::vector<Episode> sources);
    ReplayBackend(std::string id, Episode source);

    const std::string& id() const override { return id_; }

    std::vector<Outcome> predict(const PatientState& state, std::span<const Action> actions,
                                 const SamplingContext& ctx) const override;

private:
    std::string id_;
    std::vector<Episode> sources_;
};

} // namespace trajsim
