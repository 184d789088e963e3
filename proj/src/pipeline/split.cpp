#include "trajsim/pipeline.hpp"

#include "trajsim/error.hpp"
#include "trajsim/random.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace trajsim {

using nlohmann::json;

void validate(const SplitConfig& cfg) {
    if (!(cfg.test_fraction >= 0.0 && cfg.test_fraction < 1.0))
        throw Error(ErrorCode::ConfigError, "test_fraction must be in [0, 1)");
    if (cfg.stratify_by != "primary_diagnosis" && cfg.stratify_by != "none")
        throw Error(ErrorCode::ConfigError, "stratify_by must be 'primary_diagnosis' or 'none'");
}

json SplitResult::manifest() const {
    auto ids = [](const std::vector<Episode>& v) {
        json a = json::array();
        for (const auto& e : v) a.push_back(e.admission_id);
        return a;
    };
    return {{"train", ids(train)}, {"test", ids(test)}, {"warnings", warnings}};
}

namespace {

struct Patient {
    std::string subject_id;
    std::vector<std::size_t> episodes;  // indices into the sorted corpus
};

std::string stratum_of(const Episode& first, const SplitConfig& cfg) {
    if (cfg.stratify_by == "none") return "all";
    try {
        return canonicalize_code(first.diagnostics.primary.content);
    } catch (const Error&) {
        return "(none)";
    }
}

} // namespace

SplitResult split_by_patient(std::vector<Episode> corpus, const SplitConfig& cfg) {
    validate(cfg);
    std::sort(corpus.begin(), corpus.end(), [](const Episode& a, const Episode& b) {
        return std::tie(a.subject_id, a.admission_id) < std::tie(b.subject_id, b.admission_id);
    });

    // Patients in subject order; the first admission decides the stratum.
    std::map<std::string, std::vector<Patient>> strata;
    for (std::size_t i = 0; i < corpus.size();) {
        Patient p{corpus[i].subject_id, {}};
        while (i < corpus.size() && corpus[i].subject_id == p.subject_id) p.episodes.push_back(i++);
        strata[stratum_of(corpus[p.episodes.front()], cfg)].push_back(std::move(p));
    }

    SplitResult out;
    std::vector<char> in_test(corpus.size(), 0);
    for (auto& [name, patients] : strata) {
        if (patients.size() == 1) {
            out.warnings.push_back("DegenerateStratum: '" + name + "' has a single patient; assigned to train");
            continue;
        }
        Rng rng(derive(cfg.seed, {fnv1a64(name)}));
        rng.shuffle(patients);
        std::size_t total = 0;
        for (const auto& p : patients) total += p.episodes.size();
        const double target = cfg.test_fraction * static_cast<double>(total);
        double taken = 0.0;
        for (const auto& p : patients) {
            const double with = taken + static_cast<double>(p.episodes.size());
            if (std::abs(with - target) < std::abs(taken - target)) {
                taken = with;
                for (auto i : p.episodes) in_test[i] = 1;
            }
        }
    }
    for (std::size_t i = 0; i < corpus.size(); ++i)
        (in_test[i] ? out.test : out.train).push_back(std::move(corpus[i]));
    return out;
}

} // namespace trajsim
