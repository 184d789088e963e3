#pragma once
// Corpus construction: assembling episodes from row streams, population
// statistics, percentile filtering and patient-level splitting.

#include "trajsim/domain.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace trajsim {

// ---- assembly --------------------------------------------------------------
//
// Static records, one JSON object per line:
//   {"subject_id", "admission_id", "profile": {...}, "diagnostics": {...},
//    "length_of_stay"?: days}
// Event rows, one JSON object per line:
//   {"subject_id", "admission_id", "timestamp": minutes, "category", "code",
//    "kind": "inquiry"|"intervention", "status", "display_name"?,
//    "value"?, "unit"?, "labels"?: [...], "detail"?: {...}}
// Only rows with status "executed" are used. An intervention's value and
// unit are kept as its dose in the action detail.

struct AssemblyReport {
    std::size_t static_records = 0;
    std::size_t rows_read = 0;
    std::size_t malformed_rows = 0;
    std::size_t not_executed = 0;
    std::size_t duplicates_removed = 0;
    std::size_t admissions_without_static = 0;
    std::size_t invalid_episodes = 0;
    std::size_t episodes = 0;
    std::vector<std::string> messages;  // first few row-level problems

    nlohmann::json to_json() const;
};

std::vector<Episode> assemble_episodes(std::istream& static_records, std::istream& event_rows,
                                       AssemblyReport* report = nullptr);

// ---- statistics ------------------------------------------------------------

inline constexpr double kDefaultMinLos = 0.01;  // days

// Nearest-rank percentile of an unsorted sample: the value at rank
// ceil(p * n) in ascending order, rank 1 for p = 0. Throws EmptyInput.
double nearest_rank_percentile(std::vector<double> values, double p);

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::size_t> counts;
};

struct MetricSummary {
    double max = 0.0;
    double mean = 0.0;
    double median = 0.0;
    Histogram histogram;
};

// Metric names: "age", "los_days", "count.<category>", "total_events",
// "event_intensity". Every category seen anywhere in the corpus appears for
// every episode, zero where absent; "count.lab", "count.microbiology" and
// "count.medication" are always present.
std::map<std::string, double> episode_metrics(const Episode& e, double min_los = kDefaultMinLos,
                                              const std::vector<std::string>& categories = {});

struct CorpusStats {
    std::size_t episodes = 0;
    std::map<std::string, MetricSummary> metrics;

    nlohmann::json to_json() const;
};

// Throws Error(EmptyCorpus).
CorpusStats compute_corpus_stats(const std::vector<Episode>& corpus, double min_los = kDefaultMinLos,
                                 std::size_t bins = 20);

// ---- filtering -------------------------------------------------------------

struct FilterConfig {
    double upper_percentile = 0.90;
    double lower_percentile = 0.10;
    bool require_medication = true;
    // Also reject episodes whose capped per-category counts fall below the
    // lower percentile.
    bool category_lower_bounds = false;
    std::vector<std::string> capped_metrics{"los_days", "count.lab", "count.microbiology", "count.medication"};
    double min_los = kDefaultMinLos;
};

void validate(const FilterConfig& cfg);
FilterConfig filter_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FilterConfig& cfg);

// Thresholds derived from one corpus and frozen for reuse.
struct FilterThresholds {
    // (metric, bound) in rule order.
    std::vector<std::pair<std::string, double>> caps;    // max allowed
    std::vector<std::pair<std::string, double>> floors;  // min allowed
    bool require_medication = true;
    double min_los = kDefaultMinLos;
};

FilterThresholds derive_thresholds(const std::vector<Episode>& corpus, const FilterConfig& cfg);
nlohmann::json to_json(const FilterThresholds& t);
FilterThresholds filter_thresholds_from_json(const nlohmann::json& j);

// First failing rule in fixed order, or nullopt when the episode passes.
// Rule names: "no-medication", "<metric> above cap", "<metric> below floor".
std::optional<std::string> rejection_rule(const Episode& e, const FilterThresholds& t);

struct FilterReport {
    FilterThresholds thresholds;
    std::size_t input = 0;
    std::size_t kept = 0;
    std::map<std::string, std::size_t> rejected_by_rule;
    std::vector<std::string> rejected_ids;

    nlohmann::json to_json() const;
};

struct FilterResult {
    std::vector<Episode> kept;
    FilterReport report;
};

// Two-pass: thresholds come from the corpus itself. Throws EmptyCorpus.
FilterResult filter_corpus(const std::vector<Episode>& corpus, const FilterConfig& cfg);
// One pass with given thresholds.
FilterResult filter_corpus(const std::vector<Episode>& corpus, const FilterThresholds& thresholds);

// ---- splitting ---------------------------------------------------------------

struct SplitConfig {
    double test_fraction = 0.1;
    std::uint64_t seed = 0;
    // "primary_diagnosis" (default) or "none" for a single stratum.
    std::string stratify_by = "primary_diagnosis";
};

void validate(const SplitConfig& cfg);

struct SplitResult {
    std::vector<Episode> train;
    std::vector<Episode> test;
    std::vector<std::string> warnings;  // DegenerateStratum notices

    nlohmann::json manifest() const;  // admission ids per split
};

// Patients are grouped by subject id; a patient's stratum is the
// canonicalized primary diagnosis of their first admission. Within each
// stratum patients are shuffled with a seed derived from the stratum name
// and greedily moved to test while that brings the stratum's test share
// closer to test_fraction. Strata with a single patient go to train.
SplitResult split_by_patient(std::vector<Episode> corpus, const SplitConfig& cfg);

} // namespace trajsim
