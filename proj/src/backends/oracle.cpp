#include "trajsim/oracle.hpp"

#include "trajsim/error.hpp"
#include "trajsim/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace trajsim {

using nlohmann::json;

namespace {

[[noreturn]] void config_fail(const std::string& what) {
    throw Error(ErrorCode::ConfigError, "oracle config: " + what);
}

const AnalyteSpec& analyte_or_throw(const OracleConfig& cfg, std::string_view code) {
    auto it = cfg.analytes.find(std::string(code));
    if (it == cfg.analytes.end())
        throw Error(ErrorCode::UnknownAnalyte, "unknown analyte '" + std::string(code) + "'");
    return it->second;
}

// Event sets in chronological order; histories are normally already sorted.
std::vector<std::size_t> chronological(std::span<const EventSet> history) {
    std::vector<std::size_t> order(history.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return history[a].timestamp < history[b].timestamp;
    });
    return order;
}

// Integrates the latent from (start, value) to `at`, applying interventions
// stamped in [start, at].
double propagate(const OracleConfig& cfg, const AnalyteSpec& spec, std::string_view code,
                 std::span<const EventSet> history, Timestamp start, double value, Timestamp at) {
    Timestamp cursor = start;
    for (std::size_t idx : chronological(history)) {
        const auto& set = history[idx];
        if (set.timestamp < start || at < set.timestamp) continue;
        double delta = 0.0;
        for (const auto& ev : set.events) {
            if (ev.action.kind != ActionKind::Intervention) continue;
            auto it = cfg.interventions.find(ev.action.code);
            if (it == cfg.interventions.end()) continue;
            for (const auto& effect : it->second)
                if (effect.target == code) delta += effect.delta;
        }
        if (delta == 0.0) continue;
        value = relax(value, spec.baseline, spec.decay_rate, (set.timestamp.minutes - cursor.minutes) / 60.0);
        value += delta;
        cursor = set.timestamp;
    }
    return relax(value, spec.baseline, spec.decay_rate, (at.minutes - cursor.minutes) / 60.0);
}

std::set<std::string> token_set(const json& j, const char* key) {
    std::set<std::string> out;
    auto it = j.find(key);
    if (it == j.end()) return out;
    if (!it->is_array()) config_fail(std::string("'") + key + "' must be an array");
    for (const auto& v : *it) out.insert(canonicalize_code(v.get<std::string>()));
    return out;
}

} // namespace

void validate(const OracleConfig& cfg) {
    if (!std::isfinite(cfg.noise_sigma) || cfg.noise_sigma < 0.0) config_fail("noise_sigma must be >= 0");
    for (const auto& [code, spec] : cfg.analytes) {
        if (!std::isfinite(spec.baseline)) config_fail("baseline of '" + code + "' must be finite");
        if (!std::isfinite(spec.decay_rate) || spec.decay_rate < 0.0)
            config_fail("decay_rate of '" + code + "' must be >= 0");
    }
    for (const auto& [code, effects] : cfg.interventions) {
        for (const auto& e : effects) {
            if (!cfg.analytes.count(e.target))
                config_fail("intervention '" + code + "' targets undeclared analyte '" + e.target + "'");
            if (!std::isfinite(e.delta)) config_fail("intervention '" + code + "' has a non-finite delta");
        }
    }
    for (const auto& [code, rule] : cfg.label_rules) {
        if (!cfg.analytes.count(rule.driver))
            config_fail("label rule '" + code + "' is driven by undeclared analyte '" + rule.driver + "'");
        if (cfg.analytes.count(code)) config_fail("'" + code + "' is both an analyte and a label rule");
    }
}

OracleConfig oracle_config_from_json(const json& j) {
    if (!j.is_object()) config_fail("expected an object");
    OracleConfig cfg;
    try {
        const auto analytes = j.value("analytes", json::object());
        const auto interventions = j.value("interventions", json::object());
        const auto label_rules = j.value("label_rules", json::object());
        for (const auto& [raw, spec] : analytes.items()) {
            AnalyteSpec a;
            a.baseline = spec.at("baseline").get<double>();
            a.unit = spec.value("unit", "");
            a.decay_rate = spec.value("decay_rate", 0.0);
            cfg.analytes.emplace(canonicalize_code(raw), a);
        }
        for (const auto& [raw, effects] : interventions.items()) {
            std::vector<InterventionEffect> list;
            for (const auto& e : effects)
                list.push_back({canonicalize_code(e.at("target").get<std::string>()), e.at("delta").get<double>()});
            cfg.interventions.emplace(canonicalize_code(raw), std::move(list));
        }
        for (const auto& [raw, rule] : label_rules.items()) {
            LabelRule r;
            r.driver = canonicalize_code(rule.at("driver").get<std::string>());
            r.threshold = rule.at("threshold").get<double>();
            r.positive = token_set(rule, "positive");
            r.negative = token_set(rule, "negative");
            cfg.label_rules.emplace(canonicalize_code(raw), std::move(r));
        }
        cfg.noise_sigma = j.value("noise_sigma", 0.0);
        cfg.seed = j.value("seed", std::uint64_t{0});
        cfg.anchor_to_observations = j.value("anchor_to_observations", false);
    } catch (const json::exception& ex) {
        config_fail(ex.what());
    } catch (const Error& ex) {
        config_fail(ex.what());
    }
    validate(cfg);
    return cfg;
}

json to_json(const OracleConfig& cfg) {
    json analytes = json::object();
    for (const auto& [code, a] : cfg.analytes)
        analytes[code] = {{"baseline", a.baseline}, {"unit", a.unit}, {"decay_rate", a.decay_rate}};
    json interventions = json::object();
    for (const auto& [code, effects] : cfg.interventions) {
        json list = json::array();
        for (const auto& e : effects) list.push_back({{"target", e.target}, {"delta", e.delta}});
        interventions[code] = std::move(list);
    }
    json rules = json::object();
    for (const auto& [code, r] : cfg.label_rules)
        rules[code] = {{"driver", r.driver}, {"threshold", r.threshold}, {"positive", r.positive}, {"negative", r.negative}};
    return json{{"analytes", std::move(analytes)},
                {"interventions", std::move(interventions)},
                {"label_rules", std::move(rules)},
                {"noise_sigma", cfg.noise_sigma},
                {"seed", cfg.seed},
                {"anchor_to_observations", cfg.anchor_to_observations}};
}

double relax(double value, double baseline, double decay_rate, double hours) {
    if (decay_rate == 0.0 || hours == 0.0) return value;
    return baseline + (value - baseline) * std::exp(-decay_rate * hours);
}

double oracle_latent(const OracleConfig& cfg, std::string_view code, std::span<const EventSet> history, Timestamp at) {
    const auto& spec = analyte_or_throw(cfg, code);
    return propagate(cfg, spec, code, history, Timestamp{0}, spec.baseline, at);
}

double oracle_anchored_latent(const OracleConfig& cfg, std::string_view code, std::span<const EventSet> history,
                              Timestamp at) {
    const auto& spec = analyte_or_throw(cfg, code);
    const EventSet* anchor_set = nullptr;
    double anchor_value = 0.0;
    for (const auto& set : history) {
        if (at < set.timestamp) continue;
        if (anchor_set && set.timestamp < anchor_set->timestamp) continue;
        for (const auto& ev : set.events) {
            if (ev.action.kind != ActionKind::Inquiry || ev.action.code != code) continue;
            if (const auto* n = std::get_if<NumericOutcome>(&ev.outcome)) {
                anchor_set = &set;
                anchor_value = n->value;
                break;
            }
        }
    }
    if (!anchor_set) return oracle_latent(cfg, code, history, at);
    return propagate(cfg, spec, code, history, anchor_set->timestamp, anchor_value, at);
}

double oracle_noise(const OracleConfig& cfg, std::uint64_t stream, std::size_t step, std::size_t action_index) {
    if (cfg.noise_sigma == 0.0) return 0.0;
    return cfg.noise_sigma * gaussian_at(derive(cfg.seed, {stream, step, action_index}));
}

std::vector<Outcome> oracle_predict(const OracleConfig& cfg, const PatientState& state,
                                    std::span<const Action> actions, std::uint64_t stream) {
    auto latent = [&](const std::string& code) {
        return cfg.anchor_to_observations ? oracle_anchored_latent(cfg, code, state.history, state.now)
                                          : oracle_latent(cfg, code, state.history, state.now);
    };
    const std::size_t step = state.history.size();
    std::vector<Outcome> out;
    out.reserve(actions.size());
    for (std::size_t i = 0; i < actions.size(); ++i) {
        const auto& a = actions[i];
        if (a.kind == ActionKind::Intervention) {
            out.emplace_back(EmptyOutcome{});
            continue;
        }
        if (a.kind != ActionKind::Inquiry)
            throw Error(ErrorCode::UnsupportedActionKind, "unsupported action kind for '" + a.code + "'");
        if (auto it = cfg.analytes.find(a.code); it != cfg.analytes.end()) {
            const double x = latent(a.code);
            out.emplace_back(NumericOutcome{x * (1.0 + oracle_noise(cfg, stream, step, i)), it->second.unit});
        } else if (auto rule = cfg.label_rules.find(a.code); rule != cfg.label_rules.end()) {
            const double driver = latent(rule->second.driver);
            LabelOutcome label;
            label.values = driver > rule->second.threshold ? rule->second.positive : rule->second.negative;
            out.emplace_back(std::move(label));
        } else {
            throw Error(ErrorCode::UnknownAnalyte, "unknown analyte '" + a.code + "'");
        }
    }
    return out;
}

OracleBackend::OracleBackend(std::string id, OracleConfig cfg) : id_(std::move(id)), cfg_(std::move(cfg)) {
    validate(cfg_);
}

std::vector<Outcome> OracleBackend::predict(const PatientState& state, std::span<const Action> actions,
                                            const SamplingContext& ctx) const {
    return oracle_predict(cfg_, state, actions, ctx.stream);
}

} // namespace trajsim
