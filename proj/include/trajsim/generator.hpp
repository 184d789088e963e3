#pragma once
// Synthetic corpus generator driven by the oracle.
//
// Episodes are produced by stepping an oracle session with sampled action
// schedules, so a rollout with the generating oracle and the same seed
// reproduces each episode exactly.
//
// High-sensitivity steps (relative change above 0.5 between consecutive
// observations of an analyte) arise only from injected jump interventions:
// the target is observed in the injection step and again in the next one.
// Any other observation that would change by more than half relative to
// the previous value of that analyte is removed from the schedule, so the
// number of injections equals the size of the high-sensitivity subset.

#include "trajsim/oracle.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace trajsim {

struct IntRange {
    std::int64_t min = 0;
    std::int64_t max = 0;
};

struct GenConfig {
    std::size_t n_episodes = 100;
    IntRange admissions_per_patient{1, 2};
    IntRange steps{8, 16};
    IntRange actions_per_step{2, 4};
    IntRange gap_minutes{30, 180};
    double intervention_probability = 0.3;
    // Per-step probability of a jump when no analyte is displaced.
    double injection_rate = 0.0;
    // Intervention codes used only for injections; each must be defined in
    // the oracle with a single effect.
    std::vector<std::string> jump_interventions;
    // An analyte counts as displaced while |latent - baseline| exceeds this
    // share of the baseline; displaced analytes are observed every step.
    double displaced_fraction = 0.25;
    IntRange age{18, 90};
    std::vector<std::string> genders{"F", "M"};
    std::vector<std::string> diagnoses{"sepsis"};
    std::map<std::string, std::string> categories;  // code -> category override
};

void validate(const GenConfig& gen, const OracleConfig& oracle);
GenConfig gen_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GenConfig& gen);

struct GenerationReport {
    std::size_t episodes = 0;
    std::size_t injections = 0;  // realized jumps, one per high-sensitivity pair
    std::size_t suppressed_observations = 0;
};

// Throws Error(ConfigError).
std::vector<Episode> generate_synthetic_corpus(const OracleConfig& oracle, const GenConfig& gen,
                                               std::uint64_t seed, GenerationReport* report = nullptr);

} // namespace trajsim
