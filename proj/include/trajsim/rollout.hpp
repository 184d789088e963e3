#pragma once
// Trajectory rollout over a recorded episode.
//
// Full-trajectory mode feeds the session's own predictions back as history.
// Next-step mode conditions every step on the recorded history (teacher
// forcing). Both replay the source's timestamps and action sets, so the
// predicted episode differs from the source only in outcomes.

#include "trajsim/engine.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace trajsim {

enum class RolloutMode { FullTrajectory, NextStep };

std::string_view to_string(RolloutMode mode);
RolloutMode parse_rollout_mode(std::string_view text);  // "full" | "next"

struct RolloutResult {
    Episode predicted;
    std::string source_subject_id;
    std::string source_admission_id;
    RolloutMode mode = RolloutMode::FullTrajectory;
    std::string backend_id;
    std::uint64_t seed = 0;
};

// Session seed used for an episode in both rollout modes and by the corpus
// generator, so a generating oracle reproduces its own noise.
std::uint64_t episode_session_seed(std::uint64_t seed, std::string_view admission_id);

// Step errors are rethrown with the failing step index prepended.
RolloutResult rollout_full(const Episode& source, const OutcomeModel& backend, std::uint64_t seed,
                           const StepOptions& options = {});
RolloutResult rollout_next_step(const Episode& source, const OutcomeModel& backend, std::uint64_t seed,
                                const StepOptions& options = {});

RolloutResult rollout(const Episode& source, const OutcomeModel& backend, RolloutMode mode, std::uint64_t seed,
                      const StepOptions& options = {});

// Rollout files are ordinary episode corpora holding the predicted episodes,
// plus a sidecar "<path>.meta.json" with mode, backend id and seed.
struct RolloutMeta {
    RolloutMode mode = RolloutMode::FullTrajectory;
    std::string backend_id;
    std::uint64_t seed = 0;
    std::size_t episodes = 0;
};

std::filesystem::path rollout_meta_path(const std::filesystem::path& corpus_path);
void write_rollout_file(const std::filesystem::path& path, const std::vector<RolloutResult>& results);
RolloutMeta read_rollout_meta(const std::filesystem::path& corpus_path);

} // namespace trajsim
