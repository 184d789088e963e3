#pragma once
// Synthetic physiology used as desk-scale ground truth.
//
// Each analyte has a latent value x(t). x(0) equals the baseline b. Between
// influence times the latent relaxes toward the baseline,
//     x(t + d) = b + (x(t) - b) * exp(-lambda * d),   d in hours,
// and every intervention in the history that targets the analyte adds its
// delta instantaneously at the intervention's timestamp. Inquiries never
// alter the latent.
//
// Observations drawn at step t only see the history before t, so an
// intervention issued in the same event set as an inquiry takes effect after
// that inquiry is observed.
//
// Numeric inquiries return latent * (1 + eps) where eps = sigma * z and z is
// a standard normal drawn from derive(seed, {stream, step, action_index})
// (see random.hpp). Label inquiries compare the driver analyte's latent with
// a threshold.
//
// With anchor_to_observations set, the latent is re-estimated from the most
// recent numeric observation of the analyte in the history instead of being
// integrated from admission. On ground-truth history this matches the plain
// oracle; on its own noisy history errors carry forward, which is what a
// state-tracking simulator does.

#include "trajsim/outcome_model.hpp"

#include <json.hpp>

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace trajsim {

struct AnalyteSpec {
    double baseline = 0.0;
    std::string unit;
    double decay_rate = 0.0;  // per hour

    bool operator==(const AnalyteSpec&) const = default;
};

struct InterventionEffect {
    std::string target;
    double delta = 0.0;

    bool operator==(const InterventionEffect&) const = default;
};

struct LabelRule {
    std::string driver;
    double threshold = 0.0;
    std::set<std::string> positive;
    std::set<std::string> negative;

    bool operator==(const LabelRule&) const = default;
};

struct OracleConfig {
    std::map<std::string, AnalyteSpec> analytes;
    std::map<std::string, std::vector<InterventionEffect>> interventions;
    std::map<std::string, LabelRule> label_rules;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    bool anchor_to_observations = false;

    bool operator==(const OracleConfig&) const = default;
};

// Throws Error(ConfigError) naming the first broken invariant.
void validate(const OracleConfig& cfg);

OracleConfig oracle_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OracleConfig& cfg);

double relax(double value, double baseline, double decay_rate, double hours);

// Latent value of `code` at `at` given the history. Interventions stamped at
// or before `at` are applied. Throws Error(UnknownAnalyte).
double oracle_latent(const OracleConfig& cfg, std::string_view code,
                     std::span<const EventSet> history, Timestamp at);

// Latent re-anchored on the most recent observation of `code` at or before
// `at`; falls back to oracle_latent when the analyte was never observed.
double oracle_anchored_latent(const OracleConfig& cfg, std::string_view code,
                              std::span<const EventSet> history, Timestamp at);

double oracle_noise(const OracleConfig& cfg, std::uint64_t stream, std::size_t step, std::size_t action_index);

std::vector<Outcome> oracle_predict(const OracleConfig& cfg, const PatientState& state,
                                    std::span<const Action> actions, std::uint64_t stream = 0);

class OracleBackend final : public OutcomeModel {
public:
    OracleBackend(std::string id, OracleConfig cfg);

    const std::string& id() const override { return id_; }
    const OracleConfig& config() const { return cfg_; }

    std::vector<Outcome> predict(const PatientState& state, std::span<const Action> actions,
                                 const SamplingContext& ctx) const override;

private:
    std::string id_;
    OracleConfig cfg_;
};

} // namespace trajsim
