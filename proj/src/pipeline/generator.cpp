#include "trajsim/generator.hpp"

#include "trajsim/engine.hpp"
#include "trajsim/error.hpp"
#include "trajsim/random.hpp"
#include "trajsim/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <set>

namespace trajsim {

using nlohmann::json;

namespace {

void check_range(const IntRange& r, std::int64_t floor, const char* name) {
    if (r.min < floor || r.max < r.min)
        throw Error(ErrorCode::ConfigError,
                    std::string(name) + " needs " + std::to_string(floor) + " <= min <= max");
}

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::ConfigError, std::string(name) + " must be in [0, 1]");
}

IntRange range_from_json(const json& j, const char* key, IntRange fallback) {
    if (!j.contains(key)) return fallback;
    const auto& r = j.at(key);
    if (r.is_number_integer()) return {r.get<std::int64_t>(), r.get<std::int64_t>()};
    return {r.at("min").get<std::int64_t>(), r.at("max").get<std::int64_t>()};
}

json range_json(const IntRange& r) { return {{"min", r.min}, {"max", r.max}}; }

} // namespace

void validate(const GenConfig& gen, const OracleConfig& oracle) {
    validate(oracle);
    if (gen.n_episodes == 0) throw Error(ErrorCode::ConfigError, "n_episodes must be positive");
    check_range(gen.admissions_per_patient, 1, "admissions_per_patient");
    check_range(gen.steps, 1, "steps");
    check_range(gen.actions_per_step, 1, "actions_per_step");
    check_range(gen.gap_minutes, 1, "gap_minutes");
    check_range(gen.age, 0, "age");
    if (gen.age.max > 130) throw Error(ErrorCode::ConfigError, "age.max must be at most 130");
    check_probability(gen.intervention_probability, "intervention_probability");
    check_probability(gen.injection_rate, "injection_rate");
    if (!(gen.displaced_fraction > 0.0)) throw Error(ErrorCode::ConfigError, "displaced_fraction must be positive");
    if (gen.genders.empty() || gen.diagnoses.empty())
        throw Error(ErrorCode::ConfigError, "genders and diagnoses must be non-empty");
    if (oracle.analytes.empty()) throw Error(ErrorCode::ConfigError, "oracle defines no analytes");
    if (gen.injection_rate > 0.0 && gen.jump_interventions.empty())
        throw Error(ErrorCode::ConfigError, "injection_rate > 0 needs jump_interventions");
    for (const auto& code : gen.jump_interventions) {
        const auto it = oracle.interventions.find(code);
        if (it == oracle.interventions.end() || it->second.size() != 1)
            throw Error(ErrorCode::ConfigError, "jump intervention '" + code + "' must exist with a single effect");
    }
}

GenConfig gen_config_from_json(const json& j) {
    GenConfig g;
    try {
        g.n_episodes = j.value("n_episodes", g.n_episodes);
        g.admissions_per_patient = range_from_json(j, "admissions_per_patient", g.admissions_per_patient);
        g.steps = range_from_json(j, "steps", g.steps);
        g.actions_per_step = range_from_json(j, "actions_per_step", g.actions_per_step);
        g.gap_minutes = range_from_json(j, "gap_minutes", g.gap_minutes);
        g.intervention_probability = j.value("intervention_probability", g.intervention_probability);
        g.injection_rate = j.value("injection_rate", g.injection_rate);
        g.displaced_fraction = j.value("displaced_fraction", g.displaced_fraction);
        g.age = range_from_json(j, "age", g.age);
        g.genders = j.value("genders", g.genders);
        g.diagnoses = j.value("diagnoses", g.diagnoses);
        for (const auto& c : j.value("jump_interventions", std::vector<std::string>{}))
            g.jump_interventions.push_back(canonicalize_code(c));
        const auto categories = j.value("categories", json::object());
        for (const auto& [code, cat] : categories.items())
            g.categories[canonicalize_code(code)] = canonicalize_code(cat.get<std::string>());
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::ConfigError, std::string("generator config: ") + ex.what());
    } catch (const Error& ex) {
        throw Error(ErrorCode::ConfigError, std::string("generator config: ") + ex.what());
    }
    return g;
}

json to_json(const GenConfig& g) {
    return {{"n_episodes", g.n_episodes},
            {"admissions_per_patient", range_json(g.admissions_per_patient)},
            {"steps", range_json(g.steps)},
            {"actions_per_step", range_json(g.actions_per_step)},
            {"gap_minutes", range_json(g.gap_minutes)},
            {"intervention_probability", g.intervention_probability},
            {"injection_rate", g.injection_rate},
            {"jump_interventions", g.jump_interventions},
            {"displaced_fraction", g.displaced_fraction},
            {"age", range_json(g.age)},
            {"genders", g.genders},
            {"diagnoses", g.diagnoses},
            {"categories", g.categories}};
}

namespace {

// Substream keys.
constexpr std::uint64_t kPatientKey = 0x9A71E47;
constexpr std::uint64_t kEpisodeKey = 0xE915;

std::string padded(const char* prefix, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%06zu", prefix, n);
    return buf;
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& items) {
    return items[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(items.size()) - 1))];
}

struct Pools {
    std::vector<std::string> inquiries;      // analytes then label rules
    std::vector<std::string> interventions;  // excluding jumps
};

struct PendingJump {
    std::string target;
    std::string intervention;
    std::size_t verify_step = 0;
};

class EpisodeBuilder {
public:
    EpisodeBuilder(const OracleConfig& oracle, const GenConfig& gen, const Pools& pools, const OracleBackend& backend,
                   GenerationReport& report)
        : oracle_(oracle), gen_(gen), pools_(pools), backend_(backend), report_(report) {}

    Episode build(Rng& rng, Episode e, std::uint64_t seed) {
        Session session;
        session.id = e.admission_id;
        session.state.profile = e.profile;
        session.state.diagnostics = e.diagnostics;
        session.backend_ref = backend_.id();
        session.rng_seed = episode_session_seed(seed, e.admission_id);

        last_obs_.clear();
        pending_.reset();
        const auto steps = static_cast<std::size_t>(rng.uniform_int(gen_.steps.min, gen_.steps.max));
        Timestamp t{rng.uniform_int(0, 120)};
        for (std::size_t i = 0; i < steps; ++i) {
            if (i > 0) t.minutes += rng.uniform_int(gen_.gap_minutes.min, gen_.gap_minutes.max);
            auto codes = schedule(rng, session.state.history, t, i, steps);
            if (auto result = run_step(session, t, i, codes)) session = std::move(result->session);
        }
        e.timeline = session.state.history;
        const double last = e.timeline.empty() ? 0.0 : e.timeline.back().timestamp.days();
        e.length_of_stay = last + rng.uniform(0.0, 0.5);
        return e;
    }

private:
    bool is_intervention(const std::string& code) const { return oracle_.interventions.count(code) != 0; }

    std::string category(const std::string& code) const {
        if (auto it = gen_.categories.find(code); it != gen_.categories.end()) return it->second;
        if (is_intervention(code)) return "medication";
        if (oracle_.label_rules.count(code)) return "microbiology";
        return "lab";
    }

    Action action_for(const std::string& code) const {
        Action a;
        a.kind = is_intervention(code) ? ActionKind::Intervention : ActionKind::Inquiry;
        a.code = code;
        a.display_name = code;
        a.detail["category"] = category(code);
        return a;
    }

    bool displaced(const std::string& analyte, std::span<const EventSet> history, Timestamp t) const {
        const auto& spec = oracle_.analytes.at(analyte);
        const double x = oracle_latent(oracle_, analyte, history, t);
        return std::abs(x - spec.baseline) > gen_.displaced_fraction * std::abs(spec.baseline);
    }

    std::set<std::string> schedule(Rng& rng, std::span<const EventSet> history, Timestamp t, std::size_t i,
                                   std::size_t steps) {
        std::set<std::string> codes;
        bool any_displaced = false;
        for (const auto& [code, spec] : oracle_.analytes)
            if (displaced(code, history, t)) {
                codes.insert(code);
                any_displaced = true;
            }
        if (pending_) codes.insert(pending_->target);

        const auto n = static_cast<std::size_t>(rng.uniform_int(gen_.actions_per_step.min, gen_.actions_per_step.max));
        for (std::size_t attempt = 0; codes.size() < n && attempt < 8 * n; ++attempt) {
            const bool intervene = !pools_.interventions.empty() && rng.bernoulli(gen_.intervention_probability);
            codes.insert(intervene ? pick(rng, pools_.interventions) : pick(rng, pools_.inquiries));
        }
        if (i == 0 && !pools_.interventions.empty()) codes.insert(pick(rng, pools_.interventions));

        if (!any_displaced && !pending_ && i + 1 < steps && !gen_.jump_interventions.empty() &&
            rng.bernoulli(gen_.injection_rate)) {
            const auto& jump = pick(rng, gen_.jump_interventions);
            const auto& target = oracle_.interventions.at(jump).front().target;
            codes.insert(jump);
            codes.insert(target);
            pending_ = PendingJump{target, jump, i + 1};
            injected_at_ = i;
        }
        return codes;
    }

    // Relative change against the previous observation of the analyte;
    // infinite when that observation was zero, nullopt on first sight.
    std::optional<double> change(const std::string& code, double v) const {
        const auto it = last_obs_.find(code);
        if (it == last_obs_.end()) return std::nullopt;
        if (it->second == 0.0) return std::numeric_limits<double>::infinity();
        return std::abs((v - it->second) / it->second);
    }

    std::optional<StepResult> run_step(const Session& session, Timestamp t, std::size_t i,
                                       std::set<std::string> codes) {
        while (!codes.empty()) {
            StepRequest req{t, {}};
            for (const auto& c : codes) req.actions.push_back(action_for(c));
            auto result = step(session, req, backend_);

            std::optional<std::string> offending;
            bool realized = false;
            for (const auto& ev : result.event_set.events) {
                const auto* num = std::get_if<NumericOutcome>(&ev.outcome);
                if (!num) continue;
                const auto c = change(ev.action.code, num->value);
                const bool verifying = pending_ && pending_->verify_step == i && pending_->target == ev.action.code;
                if (verifying) {
                    realized = c && *c > kJumpThreshold;
                } else if (c && *c > kJumpThreshold) {
                    offending = ev.action.code;
                    break;
                }
            }
            if (offending) {
                ++report_.suppressed_observations;
                codes.erase(*offending);
                // Without its pre-jump observation an injection cannot be
                // measured, so it is withdrawn along with it.
                if (pending_ && injected_at_ == i && *offending == pending_->target) {
                    codes.erase(pending_->intervention);
                    pending_.reset();
                }
                continue;
            }
            for (const auto& ev : result.event_set.events)
                if (const auto* num = std::get_if<NumericOutcome>(&ev.outcome)) last_obs_[ev.action.code] = num->value;
            if (pending_ && pending_->verify_step == i) {
                if (realized) ++report_.injections;
                pending_.reset();
            }
            return result;
        }
        return std::nullopt;
    }

    static constexpr double kJumpThreshold = 0.5;

    const OracleConfig& oracle_;
    const GenConfig& gen_;
    const Pools& pools_;
    const OracleBackend& backend_;
    GenerationReport& report_;
    std::map<std::string, double> last_obs_;
    std::optional<PendingJump> pending_;
    std::size_t injected_at_ = 0;
};

} // namespace

std::vector<Episode> generate_synthetic_corpus(const OracleConfig& oracle, const GenConfig& gen, std::uint64_t seed,
                                               GenerationReport* report) {
    validate(gen, oracle);
    GenerationReport local;
    GenerationReport& rep = report ? *report : local;
    rep = GenerationReport{};

    Pools pools;
    for (const auto& [code, spec] : oracle.analytes) pools.inquiries.push_back(code);
    for (const auto& [code, rule] : oracle.label_rules) pools.inquiries.push_back(code);
    const std::set<std::string> jumps(gen.jump_interventions.begin(), gen.jump_interventions.end());
    for (const auto& [code, effects] : oracle.interventions)
        if (!jumps.count(code)) pools.interventions.push_back(code);

    const OracleBackend backend("generator", oracle);
    EpisodeBuilder builder(oracle, gen, pools, backend, rep);

    std::vector<Episode> corpus;
    corpus.reserve(gen.n_episodes);
    for (std::size_t patient = 0; corpus.size() < gen.n_episodes; ++patient) {
        Rng prng(derive(seed, {kPatientKey, patient}));
        const auto admissions = static_cast<std::size_t>(
            prng.uniform_int(gen.admissions_per_patient.min, gen.admissions_per_patient.max));
        StaticProfile profile;
        profile.age = static_cast<int>(prng.uniform_int(gen.age.min, gen.age.max));
        profile.gender = pick(prng, gen.genders);
        profile.allergies = prng.bernoulli(0.2) ? "penicillin" : "none known";
        const auto& primary = pick(prng, gen.diagnoses);

        for (std::size_t k = 0; k < admissions && corpus.size() < gen.n_episodes; ++k) {
            const std::size_t index = corpus.size();
            Rng rng(derive(seed, {kEpisodeKey, index}));
            Episode e;
            e.subject_id = padded("p", patient);
            e.admission_id = padded("a", index);
            e.profile = profile;
            e.profile.age = std::min(130, profile.age + static_cast<int>(k));
            e.profile.chief_complaint = "admitted for " + primary;
            e.profile.history_summary = k == 0 ? "no prior admissions" : std::to_string(k) + " prior admissions";
            e.diagnostics.primary = {primary, "clinical presentation"};
            const auto secondary = rng.uniform_int(0, 2);
            for (std::int64_t s = 0; s < secondary; ++s) {
                const auto& d = pick(rng, gen.diagnoses);
                if (d != primary) e.diagnostics.secondary.push_back({d, "comorbidity"});
            }
            corpus.push_back(builder.build(rng, std::move(e), seed));
        }
    }
    rep.episodes = corpus.size();
    return corpus;
}

} // namespace trajsim
