#include "trajsim/replay.hpp"

#include "trajsim/error.hpp"

namespace trajsim {

namespace {

bool same_identity(const Action& a, const Action& b) {
    return a.kind == b.kind && a.code == b.code && a.detail == b.detail;
}

} // namespace

std::vector<Outcome> replay_predict(const Episode& source, const PatientState& state, std::span<const Action> actions) {
    const EventSet* match = nullptr;
    for (const auto& set : source.timeline) {
        if (set.timestamp == state.now) {
            match = &set;
            break;
        }
    }
    if (!match)
        throw Error(ErrorCode::PositionNotFound,
                    "source has no event set at t=" + std::to_string(state.now.minutes));

    std::vector<bool> used(match->events.size(), false);
    std::vector<Outcome> out;
    out.reserve(actions.size());
    for (const auto& a : actions) {
        bool found = false;
        for (std::size_t i = 0; i < match->events.size(); ++i) {
            if (used[i] || !same_identity(match->events[i].action, a)) continue;
            used[i] = true;
            out.push_back(match->events[i].outcome);
            found = true;
            break;
        }
        if (!found)
            throw Error(ErrorCode::PositionNotFound, "action '" + a.code + "' not recorded at t=" +
                                                         std::to_string(state.now.minutes));
    }
    return out;
}

ReplayBackend::ReplayBackend(std::string id, std::vector<Episode> sources)
    : id_(std::move(id)), sources_(std::move(sources)) {}

ReplayBackend::ReplayBackend(std::string id, Episode source) : id_(std::move(id)) {
    sources_.push_back(std::move(source));
}

std::vector<Outcome> ReplayBackend::predict(const PatientState& state, std::span<const Action> actions,
                                            const SamplingContext&) const {
    if (sources_.size() == 1) return replay_predict(sources_.front(), state, actions);
    for (const auto& src : sources_) {
        if (src.profile == state.profile && src.diagnostics == state.diagnostics) {
            try {
                return replay_predict(src, state, actions);
            } catch (const Error& ex) {
                if (ex.code() != ErrorCode::PositionNotFound) throw;
            }
        }
    }
    throw Error(ErrorCode::PositionNotFound, "no source episode matches the state at t=" +
                                                 std::to_string(state.now.minutes));
}

} // namespace trajsim
