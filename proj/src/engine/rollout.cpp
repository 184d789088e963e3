#include "trajsim/rollout.hpp"

#include "trajsim/episode_io.hpp"
#include "trajsim/error.hpp"
#include "trajsim/random.hpp"

namespace trajsim {

using nlohmann::json;

std::string_view to_string(RolloutMode mode) { return mode == RolloutMode::FullTrajectory ? "full" : "next"; }

RolloutMode parse_rollout_mode(std::string_view text) {
    if (text == "full") return RolloutMode::FullTrajectory;
    if (text == "next") return RolloutMode::NextStep;
    throw Error(ErrorCode::ConfigError, "rollout mode must be 'full' or 'next', got '" + std::string(text) + "'");
}

std::uint64_t episode_session_seed(std::uint64_t seed, std::string_view admission_id) {
    return derive(seed, {fnv1a64(admission_id)});
}

namespace {

Session seed_session(const Episode& source, const OutcomeModel& backend, std::uint64_t seed) {
    Session s;
    s.id = source.admission_id;
    s.state.profile = source.profile;
    s.state.diagnostics = source.diagnostics;
    s.backend_ref = backend.id();
    s.rng_seed = episode_session_seed(seed, source.admission_id);
    return s;
}

RolloutResult make_result(const Episode& source, const OutcomeModel& backend, RolloutMode mode, std::uint64_t seed) {
    RolloutResult r;
    r.predicted = source;
    r.predicted.timeline.clear();
    r.predicted.timeline.reserve(source.timeline.size());
    r.source_subject_id = source.subject_id;
    r.source_admission_id = source.admission_id;
    r.mode = mode;
    r.backend_id = backend.id();
    r.seed = seed;
    return r;
}

[[noreturn]] void rethrow_at(const Error& ex, std::size_t index, const EventSet& set) {
    throw Error(ex.code(), "step " + std::to_string(index) + " (t=" + std::to_string(set.timestamp.minutes) +
                               "): " + ex.what());
}

StepRequest request_for(const EventSet& set) {
    StepRequest req{set.timestamp, {}};
    req.actions.reserve(set.events.size());
    for (const auto& ev : set.events) req.actions.push_back(ev.action);
    return req;
}

} // namespace

RolloutResult rollout_full(const Episode& source, const OutcomeModel& backend, std::uint64_t seed,
                           const StepOptions& options) {
    auto result = make_result(source, backend, RolloutMode::FullTrajectory, seed);
    Session session = seed_session(source, backend, seed);
    for (std::size_t i = 0; i < source.timeline.size(); ++i) {
        const auto& set = source.timeline[i];
        try {
            auto stepped = step(session, request_for(set), backend, options);
            result.predicted.timeline.push_back(std::move(stepped.event_set));
            session = std::move(stepped.session);
        } catch (const Error& ex) {
            rethrow_at(ex, i, set);
        }
    }
    return result;
}

RolloutResult rollout_next_step(const Episode& source, const OutcomeModel& backend, std::uint64_t seed,
                                const StepOptions& options) {
    auto result = make_result(source, backend, RolloutMode::NextStep, seed);
    Session session = seed_session(source, backend, seed);
    for (std::size_t i = 0; i < source.timeline.size(); ++i) {
        const auto& set = source.timeline[i];
        try {
            auto stepped = step(session, request_for(set), backend, options);
            result.predicted.timeline.push_back(std::move(stepped.event_set));
        } catch (const Error& ex) {
            rethrow_at(ex, i, set);
        }
        // Teacher forcing: the next step conditions on the recorded event set.
        session.state.history.push_back(set);
        sort_canonical(session.state.history.back().events);
        session.state.now = set.timestamp;
    }
    return result;
}

RolloutResult rollout(const Episode& source, const OutcomeModel& backend, RolloutMode mode, std::uint64_t seed,
                      const StepOptions& options) {
    return mode == RolloutMode::FullTrajectory ? rollout_full(source, backend, seed, options)
                                               : rollout_next_step(source, backend, seed, options);
}

std::filesystem::path rollout_meta_path(const std::filesystem::path& corpus_path) {
    auto p = corpus_path;
    p += ".meta.json";
    return p;
}

void write_rollout_file(const std::filesystem::path& path, const std::vector<RolloutResult>& results) {
    std::vector<Episode> predicted;
    predicted.reserve(results.size());
    for (const auto& r : results) predicted.push_back(r.predicted);
    write_corpus_file(path, predicted);

    json meta{{"format", "trajsim-rollout"}, {"version", 1}, {"episodes", results.size()}};
    if (!results.empty()) {
        meta["mode"] = std::string(to_string(results.front().mode));
        meta["backend"] = results.front().backend_id;
        meta["seed"] = results.front().seed;
    }
    write_text_file(rollout_meta_path(path), meta.dump(2) + "\n");
}

RolloutMeta read_rollout_meta(const std::filesystem::path& corpus_path) {
    const auto j = read_json_file(rollout_meta_path(corpus_path));
    RolloutMeta m;
    m.mode = parse_rollout_mode(j.value("mode", "full"));
    m.backend_id = j.value("backend", "");
    m.seed = j.value("seed", std::uint64_t{0});
    m.episodes = j.value("episodes", std::size_t{0});
    return m;
}

} // namespace trajsim
