#include "trajsim/pipeline.hpp"

#include "trajsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace trajsim {

using nlohmann::json;

double nearest_rank_percentile(std::vector<double> values, double p) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "percentile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "percentile must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    // The small slack keeps p * n from rounding up past an exact integer.
    auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

namespace {

const std::vector<std::string> kBaseCategories{"lab", "microbiology", "medication"};

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

Histogram histogram_of(const std::vector<double>& v, std::size_t bins) {
    Histogram h;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    h.lo = *lo;
    h.hi = *hi;
    h.counts.assign(std::max<std::size_t>(bins, 1), 0);
    const double width = (h.hi - h.lo) / static_cast<double>(h.counts.size());
    for (double x : v) {
        std::size_t b = 0;
        if (width > 0.0) b = std::min(h.counts.size() - 1, static_cast<std::size_t>((x - h.lo) / width));
        ++h.counts[b];
    }
    return h;
}

std::vector<std::string> corpus_categories(const std::vector<Episode>& corpus) {
    std::set<std::string> cats(kBaseCategories.begin(), kBaseCategories.end());
    for (const auto& e : corpus)
        for (const auto& set : e.timeline)
            for (const auto& ev : set.events) cats.insert(event_category(ev.action));
    return {cats.begin(), cats.end()};
}

} // namespace

std::map<std::string, double> episode_metrics(const Episode& e, double min_los,
                                              const std::vector<std::string>& categories) {
    std::map<std::string, double> m;
    for (const auto& c : kBaseCategories) m["count." + c] = 0.0;
    for (const auto& c : categories) m["count." + c] = 0.0;
    std::size_t total = 0;
    for (const auto& set : e.timeline)
        for (const auto& ev : set.events) {
            m["count." + event_category(ev.action)] += 1.0;
            ++total;
        }
    m["age"] = e.profile.age;
    m["los_days"] = e.length_of_stay;
    m["total_events"] = static_cast<double>(total);
    m["event_intensity"] = static_cast<double>(total) / std::max(e.length_of_stay, min_los);
    return m;
}

json CorpusStats::to_json() const {
    json j{{"episodes", episodes}};
    json ms = json::object();
    for (const auto& [name, s] : metrics)
        ms[name] = {{"max", s.max},
                    {"mean", s.mean},
                    {"median", s.median},
                    {"histogram", {{"lo", s.histogram.lo}, {"hi", s.histogram.hi}, {"counts", s.histogram.counts}}}};
    j["metrics"] = ms;
    return j;
}

CorpusStats compute_corpus_stats(const std::vector<Episode>& corpus, double min_los, std::size_t bins) {
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot compute statistics of an empty corpus");
    const auto cats = corpus_categories(corpus);
    std::map<std::string, std::vector<double>> columns;
    for (const auto& e : corpus)
        for (const auto& [k, v] : episode_metrics(e, min_los, cats)) columns[k].push_back(v);

    CorpusStats stats;
    stats.episodes = corpus.size();
    for (auto& [name, col] : columns) {
        MetricSummary s;
        s.max = *std::max_element(col.begin(), col.end());
        double sum = 0.0;
        for (double x : col) sum += x;
        s.mean = sum / static_cast<double>(col.size());
        s.median = median_of(col);
        s.histogram = histogram_of(col, bins);
        stats.metrics[name] = std::move(s);
    }
    return stats;
}

// ---- filtering -------------------------------------------------------------

void validate(const FilterConfig& cfg) {
    if (!(cfg.upper_percentile > 0.0 && cfg.upper_percentile <= 1.0))
        throw Error(ErrorCode::ConfigError, "upper_percentile must be in (0, 1]");
    if (!(cfg.lower_percentile >= 0.0 && cfg.lower_percentile < 1.0))
        throw Error(ErrorCode::ConfigError, "lower_percentile must be in [0, 1)");
    if (!(cfg.lower_percentile < cfg.upper_percentile))
        throw Error(ErrorCode::ConfigError, "lower_percentile must be below upper_percentile");
    if (!(cfg.min_los > 0.0)) throw Error(ErrorCode::ConfigError, "min_los must be positive");
}

FilterConfig filter_config_from_json(const json& j) {
    FilterConfig cfg;
    try {
        cfg.upper_percentile = j.value("upper_percentile", cfg.upper_percentile);
        cfg.lower_percentile = j.value("lower_percentile", cfg.lower_percentile);
        cfg.require_medication = j.value("require_medication", cfg.require_medication);
        cfg.category_lower_bounds = j.value("category_lower_bounds", cfg.category_lower_bounds);
        cfg.capped_metrics = j.value("capped_metrics", cfg.capped_metrics);
        cfg.min_los = j.value("min_los", cfg.min_los);
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::ConfigError, std::string("filter config: ") + ex.what());
    }
    validate(cfg);
    return cfg;
}

json to_json(const FilterConfig& cfg) {
    return {{"upper_percentile", cfg.upper_percentile},
            {"lower_percentile", cfg.lower_percentile},
            {"require_medication", cfg.require_medication},
            {"category_lower_bounds", cfg.category_lower_bounds},
            {"capped_metrics", cfg.capped_metrics},
            {"min_los", cfg.min_los}};
}

FilterThresholds derive_thresholds(const std::vector<Episode>& corpus, const FilterConfig& cfg) {
    validate(cfg);
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot derive thresholds from an empty corpus");
    const auto cats = corpus_categories(corpus);
    std::vector<std::map<std::string, double>> rows;
    rows.reserve(corpus.size());
    for (const auto& e : corpus) rows.push_back(episode_metrics(e, cfg.min_los, cats));
    auto column = [&](const std::string& metric) {
        std::vector<double> col;
        col.reserve(rows.size());
        for (const auto& r : rows) {
            const auto it = r.find(metric);
            col.push_back(it == r.end() ? 0.0 : it->second);
        }
        return col;
    };

    FilterThresholds t;
    t.require_medication = cfg.require_medication;
    t.min_los = cfg.min_los;
    for (const auto& m : cfg.capped_metrics) t.caps.emplace_back(m, nearest_rank_percentile(column(m), cfg.upper_percentile));
    t.caps.emplace_back("total_events", nearest_rank_percentile(column("total_events"), cfg.upper_percentile));
    t.floors.emplace_back("total_events", nearest_rank_percentile(column("total_events"), cfg.lower_percentile));
    if (cfg.category_lower_bounds)
        for (const auto& m : cfg.capped_metrics)
            if (m.rfind("count.", 0) == 0)
                t.floors.emplace_back(m, nearest_rank_percentile(column(m), cfg.lower_percentile));
    return t;
}

namespace {

json bounds_json(const std::vector<std::pair<std::string, double>>& b) {
    json a = json::array();
    for (const auto& [m, v] : b) a.push_back({{"metric", m}, {"value", v}});
    return a;
}

std::vector<std::pair<std::string, double>> bounds_from_json(const json& a) {
    std::vector<std::pair<std::string, double>> b;
    for (const auto& x : a) b.emplace_back(x.at("metric").get<std::string>(), x.at("value").get<double>());
    return b;
}

} // namespace

json to_json(const FilterThresholds& t) {
    return {{"caps", bounds_json(t.caps)},
            {"floors", bounds_json(t.floors)},
            {"require_medication", t.require_medication},
            {"min_los", t.min_los}};
}

FilterThresholds filter_thresholds_from_json(const json& j) {
    try {
        FilterThresholds t;
        t.caps = bounds_from_json(j.at("caps"));
        t.floors = bounds_from_json(j.at("floors"));
        t.require_medication = j.value("require_medication", true);
        t.min_los = j.value("min_los", kDefaultMinLos);
        return t;
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::ConfigError, std::string("filter thresholds: ") + ex.what());
    }
}

std::optional<std::string> rejection_rule(const Episode& e, const FilterThresholds& t) {
    const auto m = episode_metrics(e, t.min_los);
    auto value = [&](const std::string& metric) {
        const auto it = m.find(metric);
        return it == m.end() ? 0.0 : it->second;
    };
    if (t.require_medication && value("count.medication") == 0.0) return "no-medication";
    for (const auto& [metric, cap] : t.caps)
        if (value(metric) > cap) return metric + " above cap";
    for (const auto& [metric, floor] : t.floors)
        if (value(metric) < floor) return metric + " below floor";
    return std::nullopt;
}

json FilterReport::to_json() const {
    return {{"thresholds", trajsim::to_json(thresholds)},
            {"input", input},
            {"kept", kept},
            {"rejected", input - kept},
            {"rejected_by_rule", rejected_by_rule},
            {"rejected_ids", rejected_ids}};
}

FilterResult filter_corpus(const std::vector<Episode>& corpus, const FilterThresholds& thresholds) {
    FilterResult out;
    out.report.thresholds = thresholds;
    out.report.input = corpus.size();
    for (const auto& e : corpus) {
        if (auto rule = rejection_rule(e, thresholds)) {
            ++out.report.rejected_by_rule[*rule];
            out.report.rejected_ids.push_back(e.admission_id);
        } else {
            out.kept.push_back(e);
        }
    }
    out.report.kept = out.kept.size();
    return out;
}

FilterResult filter_corpus(const std::vector<Episode>& corpus, const FilterConfig& cfg) {
    return filter_corpus(corpus, derive_thresholds(corpus, cfg));
}

} // namespace trajsim
