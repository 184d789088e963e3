#pragma once
// Trajectory evaluation: numeric accuracy (S@X, SMAPE), clinical status F1,
// label precision/recall/F1, the aggregate Avg Score, retention between
// rollout modes, high-sensitivity analysis and error bucketing.
//
// Conventions:
//   relative error  |y - y_hat| / |y|; y = 0 gives 0 when y_hat = 0 and is
//                   otherwise undefined (excluded from S@X, counted)
//   S@X             share of defined errors with E <= X / 100
//   SMAPE           mean of 2|y - y_hat| / (|y| + |y_hat| + 1e-10), a
//                   fraction in [0, 2]
//   status          abnormal iff v < low or v > high; abnormal is positive
//   labels          micro-averaged set overlap across all pairs
//   high-sens.      per analyte, later index of consecutive values whose
//                   relative change is strictly above 0.5

#include "trajsim/domain.hpp"
#include "trajsim/rollout.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace trajsim {

inline constexpr double kSmapeEpsilon = 1e-10;
inline constexpr std::array<int, 3> kSuccessThresholds{10, 15, 25};
inline constexpr double kHighSensitivityThreshold = 0.5;

struct NumericPair {
    std::string code;
    double y = 0.0;
    double y_hat = 0.0;
    std::size_t step_index = 0;
    Timestamp timestamp;
};

struct LabelPair {
    std::string code;
    std::set<std::string> truth;
    std::set<std::string> pred;
    std::size_t step_index = 0;
};

struct ReferenceRange {
    double low = 0.0;
    double high = 0.0;
    std::string unit;
};

class ReferenceRangeTable {
public:
    // Throws Error(ConfigError) unless low < high.
    void add(const std::string& code, ReferenceRange range);
    const ReferenceRange* find(std::string_view code) const;
    std::size_t size() const { return ranges_.size(); }
    const std::map<std::string, ReferenceRange, std::less<>>& entries() const { return ranges_; }

private:
    std::map<std::string, ReferenceRange, std::less<>> ranges_;
};

// Accepts a list of {code, low, high, unit} records or an object keyed by
// code.
ReferenceRangeTable reference_ranges_from_json(const nlohmann::json& j);
ReferenceRangeTable load_reference_ranges(const std::filesystem::path& path);

// nullopt when undefined.
std::optional<double> relative_error(double y, double y_hat);

// Throws Error(EmptyInput) when no pair has a defined relative error.
double success_at(std::span<const NumericPair> pairs, int x_percent);
// Throws Error(EmptyInput).
double smape(std::span<const NumericPair> pairs);

struct HighSensitivitySubset {
    std::set<std::pair<std::string, std::size_t>> indices;  // (code, step_index)
    std::size_t zero_baseline_excluded = 0;
};

HighSensitivitySubset high_sensitivity_subset(const Episode& truth);

struct BinaryCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct StatusF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    BinaryCounts counts;
    std::size_t unranged = 0;
};

// Throws Error(NoRangedPairs) when no pair has a reference range.
StatusF1 stat_f1(std::span<const NumericPair> pairs, const ReferenceRangeTable& ranges);

struct LabelScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
};

// Throws Error(EmptyInput).
LabelScores label_prf(std::span<const LabelPair> pairs);

double avg_score(double s25, double stat_f1, double label_f1);

struct ErrorBuckets {
    std::size_t precise = 0;     // E <= 0.10
    std::size_t acceptable = 0;  // 0.10 < E <= 0.20
    std::size_t deviation = 0;   // E > 0.20
    std::size_t undefined = 0;
};

ErrorBuckets bucket_errors(std::span<const NumericPair> pairs);

struct HighSensitivityReport {
    double s_at_25 = 0.0;
    double smape = 0.0;
    std::size_t n = 0;
    std::size_t zero_baseline_excluded = 0;
};

struct MetricsReport {
    std::map<int, double> s_at;
    double smape = 0.0;
    std::optional<StatusF1> stat;
    std::optional<LabelScores> label;
    // Mean of S@25, Stat F1 and Label F1 over the components present.
    double avg_score = 0.0;
    std::size_t n_numeric = 0;
    std::size_t n_label = 0;
    std::size_t n_undefined_error = 0;
    std::size_t n_type_mismatch = 0;
    std::optional<HighSensitivityReport> high_sensitivity;
    ErrorBuckets buckets;
};

// Pairs extracted from one aligned (prediction, truth) episode. `hs_numeric`
// holds the numeric pairs at high-sensitivity positions of the truth.
struct AlignedPairs {
    std::vector<NumericPair> numeric;
    std::vector<LabelPair> label;
    std::vector<NumericPair> hs_numeric;
    std::size_t hs_zero_excluded = 0;
    std::size_t type_mismatch = 0;
};

// Throws Error(AlignmentError) if timestamps or action sequences differ.
AlignedPairs align(const Episode& pred, const Episode& truth);

// Throws Error(EmptyInput) when there are no numeric pairs at all.
MetricsReport report_from_pairs(const AlignedPairs& pairs, const ReferenceRangeTable& ranges);

MetricsReport evaluate(const RolloutResult& pred, const Episode& truth, const ReferenceRangeTable& ranges);
MetricsReport evaluate(const Episode& pred, const Episode& truth, const ReferenceRangeTable& ranges);

struct CorpusEvaluation {
    MetricsReport aggregate;  // pooled over all pairs
    std::vector<std::string> admission_ids;
    std::vector<std::optional<MetricsReport>> per_episode;  // nullopt: no numeric pairs
};

// Predictions are matched to truth by admission id. Per-episode work runs on
// up to `jobs` threads; aggregation order is the truth order. Throws
// AlignmentError for missing or misaligned episodes.
CorpusEvaluation evaluate_corpus(const std::vector<Episode>& pred, const std::vector<Episode>& truth,
                                 const ReferenceRangeTable& ranges, unsigned jobs = 1);

struct RetentionEntry {
    double next = 0.0;
    double full = 0.0;
    std::optional<double> pct;  // nullopt when next = 0 or a side is missing
};

struct RetentionReport {
    RetentionEntry s25, stat_f1, label_f1, overall;
};

double retention_pct(double next, double full);  // 100 * full / next
RetentionReport retention(const MetricsReport& next, const MetricsReport& full);

nlohmann::json to_json(const MetricsReport& report);
// Accepts to_json output, or an object holding it under "aggregate".
MetricsReport metrics_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RetentionReport& report);
nlohmann::json to_json(const ErrorBuckets& buckets);
std::string format_report(const MetricsReport& report);
std::string format_retention(const RetentionReport& report);
std::string format_buckets(const ErrorBuckets& buckets);

} // namespace trajsim
