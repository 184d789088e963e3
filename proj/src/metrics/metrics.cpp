#include "trajsim/metrics.hpp"

#include "trajsim/episode_io.hpp"
#include "trajsim/error.hpp"
#include "trajsim/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

namespace trajsim {

using nlohmann::json;

void ReferenceRangeTable::add(const std::string& code, ReferenceRange range) {
    if (!std::isfinite(range.low) || !std::isfinite(range.high) || !(range.low < range.high))
        throw Error(ErrorCode::ConfigError, "reference range for '" + code + "' needs low < high");
    ranges_[canonicalize_code(code)] = std::move(range);
}

const ReferenceRange* ReferenceRangeTable::find(std::string_view code) const {
    auto it = ranges_.find(code);
    return it == ranges_.end() ? nullptr : &it->second;
}

namespace {

ReferenceRange range_from_json(const json& j) {
    try {
        return {j.at("low").get<double>(), j.at("high").get<double>(), j.value("unit", "")};
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::ConfigError, std::string("reference range: ") + ex.what());
    }
}

} // namespace

ReferenceRangeTable reference_ranges_from_json(const json& j) {
    ReferenceRangeTable table;
    const json& body = j.is_object() && j.contains("ranges") ? j.at("ranges") : j;
    if (body.is_array()) {
        for (const auto& row : body) {
            if (!row.is_object() || !row.contains("code") || !row["code"].is_string())
                throw Error(ErrorCode::ConfigError, "reference range rows need a string 'code'");
            table.add(row["code"].get<std::string>(), range_from_json(row));
        }
    } else if (body.is_object()) {
        for (const auto& [code, row] : body.items()) table.add(code, range_from_json(row));
    } else {
        throw Error(ErrorCode::ConfigError, "reference ranges must be a list or an object");
    }
    return table;
}

ReferenceRangeTable load_reference_ranges(const std::filesystem::path& path) {
    return reference_ranges_from_json(read_json_file(path));
}

std::optional<double> relative_error(double y, double y_hat) {
    if (y == 0.0) {
        if (y_hat == 0.0) return 0.0;
        return std::nullopt;
    }
    return std::abs(y - y_hat) / std::abs(y);
}

double success_at(std::span<const NumericPair> pairs, int x_percent) {
    const double limit = x_percent / 100.0;
    std::size_t defined = 0, hits = 0;
    for (const auto& p : pairs) {
        auto e = relative_error(p.y, p.y_hat);
        if (!e) continue;
        ++defined;
        if (*e <= limit) ++hits;
    }
    if (defined == 0) throw Error(ErrorCode::EmptyInput, "S@X needs at least one pair with a defined relative error");
    return static_cast<double>(hits) / static_cast<double>(defined);
}

double smape(std::span<const NumericPair> pairs) {
    if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "SMAPE needs at least one pair");
    double sum = 0.0;
    for (const auto& p : pairs)
        sum += 2.0 * std::abs(p.y - p.y_hat) / (std::abs(p.y) + std::abs(p.y_hat) + kSmapeEpsilon);
    return sum / static_cast<double>(pairs.size());
}

HighSensitivitySubset high_sensitivity_subset(const Episode& truth) {
    HighSensitivitySubset out;
    std::unordered_map<std::string, double> previous;
    for (std::size_t step = 0; step < truth.timeline.size(); ++step) {
        for (const auto& ev : truth.timeline[step].events) {
            const auto* num = std::get_if<NumericOutcome>(&ev.outcome);
            if (!num) continue;
            auto [it, first] = previous.try_emplace(ev.action.code, num->value);
            if (first) continue;
            const double prev = it->second;
            it->second = num->value;
            if (prev == 0.0) {
                ++out.zero_baseline_excluded;
                continue;
            }
            if (std::abs((num->value - prev) / prev) > kHighSensitivityThreshold)
                out.indices.emplace(ev.action.code, step);
        }
    }
    return out;
}

namespace {

double f1_of(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

StatusF1 stat_f1(std::span<const NumericPair> pairs, const ReferenceRangeTable& ranges) {
    StatusF1 out;
    std::size_t ranged = 0;
    for (const auto& p : pairs) {
        const auto* r = ranges.find(p.code);
        if (!r) {
            ++out.unranged;
            continue;
        }
        ++ranged;
        const bool truth = p.y < r->low || p.y > r->high;
        const bool pred = p.y_hat < r->low || p.y_hat > r->high;
        if (truth && pred) ++out.counts.tp;
        else if (!truth && pred) ++out.counts.fp;
        else if (truth && !pred) ++out.counts.fn;
        else ++out.counts.tn;
    }
    if (ranged == 0) throw Error(ErrorCode::NoRangedPairs, "no numeric pair has a reference range");
    out.precision = ratio(out.counts.tp, out.counts.tp + out.counts.fp);
    out.recall = ratio(out.counts.tp, out.counts.tp + out.counts.fn);
    out.f1 = f1_of(out.precision, out.recall);
    return out;
}

LabelScores label_prf(std::span<const LabelPair> pairs) {
    if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "label scoring needs at least one pair");
    LabelScores out;
    for (const auto& p : pairs) {
        for (const auto& v : p.pred) (p.truth.count(v) ? out.tp : out.fp)++;
        for (const auto& v : p.truth)
            if (!p.pred.count(v)) ++out.fn;
    }
    out.precision = ratio(out.tp, out.tp + out.fp);
    out.recall = ratio(out.tp, out.tp + out.fn);
    out.f1 = f1_of(out.precision, out.recall);
    return out;
}

double avg_score(double s25, double stat_f1, double label_f1) { return (s25 + stat_f1 + label_f1) / 3.0; }

ErrorBuckets bucket_errors(std::span<const NumericPair> pairs) {
    ErrorBuckets b;
    for (const auto& p : pairs) {
        auto e = relative_error(p.y, p.y_hat);
        if (!e) ++b.undefined;
        else if (*e <= 0.10) ++b.precise;
        else if (*e <= 0.20) ++b.acceptable;
        else ++b.deviation;
    }
    return b;
}

namespace {

std::vector<Event> canonical_events(const EventSet& set) {
    auto events = set.events;
    sort_canonical(events);
    return events;
}

[[noreturn]] void misaligned(const Episode& truth, std::size_t step, const std::string& what) {
    throw Error(ErrorCode::AlignmentError,
                "episode " + truth.admission_id + ", step " + std::to_string(step) + ": " + what);
}

} // namespace

AlignedPairs align(const Episode& pred, const Episode& truth) {
    if (pred.timeline.size() != truth.timeline.size())
        throw Error(ErrorCode::AlignmentError, "episode " + truth.admission_id + ": prediction has " +
                                                   std::to_string(pred.timeline.size()) + " steps, truth has " +
                                                   std::to_string(truth.timeline.size()));
    const auto hs = high_sensitivity_subset(truth);
    AlignedPairs out;
    out.hs_zero_excluded = hs.zero_baseline_excluded;
    for (std::size_t i = 0; i < truth.timeline.size(); ++i) {
        const auto& ts = truth.timeline[i];
        const auto& ps = pred.timeline[i];
        if (ts.timestamp != ps.timestamp) misaligned(truth, i, "timestamps differ");
        if (ts.events.size() != ps.events.size()) misaligned(truth, i, "action counts differ");
        const auto te = canonical_events(ts);
        const auto pe = canonical_events(ps);
        for (std::size_t j = 0; j < te.size(); ++j) {
            const auto& ta = te[j].action;
            const auto& pa = pe[j].action;
            if (ta.kind != pa.kind || ta.code != pa.code || ta.detail != pa.detail)
                misaligned(truth, i, "action " + std::to_string(j) + " differs ('" + ta.code + "' vs '" + pa.code + "')");
            const auto& to = te[j].outcome;
            const auto& po = pe[j].outcome;
            if (is_empty(to) && is_empty(po)) continue;
            if (const auto* tn = std::get_if<NumericOutcome>(&to)) {
                if (const auto* pn = std::get_if<NumericOutcome>(&po)) {
                    NumericPair pair{ta.code, tn->value, pn->value, i, ts.timestamp};
                    if (hs.indices.count({ta.code, i})) out.hs_numeric.push_back(pair);
                    out.numeric.push_back(std::move(pair));
                    continue;
                }
            } else if (const auto* tl = std::get_if<LabelOutcome>(&to)) {
                if (const auto* pl = std::get_if<LabelOutcome>(&po)) {
                    out.label.push_back({ta.code, tl->values, pl->values, i});
                    continue;
                }
            }
            ++out.type_mismatch;
        }
    }
    return out;
}

MetricsReport report_from_pairs(const AlignedPairs& pairs, const ReferenceRangeTable& ranges) {
    if (pairs.numeric.empty()) throw Error(ErrorCode::EmptyInput, "no numeric pairs to evaluate");
    MetricsReport r;
    for (int x : kSuccessThresholds) r.s_at[x] = success_at(pairs.numeric, x);
    r.smape = smape(pairs.numeric);
    if (ranges.size() > 0) {
        try {
            r.stat = stat_f1(pairs.numeric, ranges);
        } catch (const Error& ex) {
            if (ex.code() != ErrorCode::NoRangedPairs) throw;
        }
    }
    if (!pairs.label.empty()) r.label = label_prf(pairs.label);

    double sum = r.s_at.at(25);
    int parts = 1;
    if (r.stat) sum += r.stat->f1, ++parts;
    if (r.label) sum += r.label->f1, ++parts;
    r.avg_score = parts == 3 ? avg_score(r.s_at.at(25), r.stat->f1, r.label->f1) : sum / parts;

    r.n_numeric = pairs.numeric.size();
    r.n_label = pairs.label.size();
    r.n_type_mismatch = pairs.type_mismatch;
    for (const auto& p : pairs.numeric)
        if (!relative_error(p.y, p.y_hat)) ++r.n_undefined_error;
    r.buckets = bucket_errors(pairs.numeric);

    HighSensitivityReport hs;
    hs.n = pairs.hs_numeric.size();
    hs.zero_baseline_excluded = pairs.hs_zero_excluded;
    if (hs.n > 0) {
        hs.smape = smape(pairs.hs_numeric);
        try {
            hs.s_at_25 = success_at(pairs.hs_numeric, 25);
        } catch (const Error&) {
            hs.s_at_25 = 0.0;
        }
    }
    r.high_sensitivity = hs;
    return r;
}

MetricsReport evaluate(const Episode& pred, const Episode& truth, const ReferenceRangeTable& ranges) {
    return report_from_pairs(align(pred, truth), ranges);
}

MetricsReport evaluate(const RolloutResult& pred, const Episode& truth, const ReferenceRangeTable& ranges) {
    return evaluate(pred.predicted, truth, ranges);
}

CorpusEvaluation evaluate_corpus(const std::vector<Episode>& pred, const std::vector<Episode>& truth,
                                 const ReferenceRangeTable& ranges, unsigned jobs) {
    if (truth.empty()) throw Error(ErrorCode::EmptyInput, "truth corpus is empty");
    std::unordered_map<std::string, const Episode*> by_id;
    for (const auto& p : pred) by_id.emplace(p.admission_id, &p);

    std::vector<AlignedPairs> aligned(truth.size());
    parallel_for(truth.size(), jobs, [&](std::size_t i) {
        auto it = by_id.find(truth[i].admission_id);
        if (it == by_id.end())
            throw Error(ErrorCode::AlignmentError, "no prediction for episode " + truth[i].admission_id);
        aligned[i] = align(*it->second, truth[i]);
    });

    CorpusEvaluation out;
    AlignedPairs pooled;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        auto& a = aligned[i];
        out.admission_ids.push_back(truth[i].admission_id);
        auto& slot = out.per_episode.emplace_back();
        try {
            slot.emplace(report_from_pairs(a, ranges));
        } catch (const Error& ex) {
            if (ex.code() != ErrorCode::EmptyInput) throw;
        }
        pooled.numeric.insert(pooled.numeric.end(), a.numeric.begin(), a.numeric.end());
        pooled.label.insert(pooled.label.end(), a.label.begin(), a.label.end());
        pooled.hs_numeric.insert(pooled.hs_numeric.end(), a.hs_numeric.begin(), a.hs_numeric.end());
        pooled.hs_zero_excluded += a.hs_zero_excluded;
        pooled.type_mismatch += a.type_mismatch;
    }
    out.aggregate = report_from_pairs(pooled, ranges);
    return out;
}

double retention_pct(double next, double full) { return 100.0 * full / next; }

namespace {

RetentionEntry entry(std::optional<double> next, std::optional<double> full) {
    RetentionEntry e;
    e.next = next.value_or(0.0);
    e.full = full.value_or(0.0);
    if (next && full && *next > 0.0) e.pct = retention_pct(*next, *full);
    return e;
}

std::optional<double> stat_of(const MetricsReport& r) {
    return r.stat ? std::optional(r.stat->f1) : std::nullopt;
}

std::optional<double> label_of(const MetricsReport& r) {
    return r.label ? std::optional(r.label->f1) : std::nullopt;
}

} // namespace

RetentionReport retention(const MetricsReport& next, const MetricsReport& full) {
    RetentionReport r;
    r.s25 = entry(next.s_at.at(25), full.s_at.at(25));
    r.stat_f1 = entry(stat_of(next), stat_of(full));
    r.label_f1 = entry(label_of(next), label_of(full));
    r.overall = entry(next.avg_score, full.avg_score);
    return r;
}

json to_json(const ErrorBuckets& b) {
    return {{"precise", b.precise}, {"acceptable", b.acceptable}, {"deviation", b.deviation},
            {"undefined", b.undefined}};
}

json to_json(const MetricsReport& r) {
    json j;
    json s = json::object();
    for (const auto& [x, v] : r.s_at) s[std::to_string(x)] = v;
    j["s_at"] = s;
    j["smape"] = r.smape;
    if (r.stat) {
        const auto& st = *r.stat;
        j["stat_f1"] = {{"precision", st.precision}, {"recall", st.recall}, {"f1", st.f1},
                        {"tp", st.counts.tp},       {"fp", st.counts.fp}, {"fn", st.counts.fn},
                        {"tn", st.counts.tn},       {"unranged", st.unranged}};
    } else {
        j["stat_f1"] = nullptr;
    }
    if (r.label) {
        const auto& l = *r.label;
        j["label"] = {{"precision", l.precision}, {"recall", l.recall}, {"f1", l.f1},
                      {"tp", l.tp},               {"fp", l.fp},         {"fn", l.fn}};
    } else {
        j["label"] = nullptr;
    }
    j["avg_score"] = r.avg_score;
    j["n_numeric"] = r.n_numeric;
    j["n_label"] = r.n_label;
    j["n_undefined_error"] = r.n_undefined_error;
    j["n_type_mismatch"] = r.n_type_mismatch;
    if (r.high_sensitivity) {
        const auto& h = *r.high_sensitivity;
        j["high_sensitivity"] = {{"s_at_25", h.s_at_25}, {"smape", h.smape}, {"n", h.n},
                                 {"zero_baseline_excluded", h.zero_baseline_excluded}};
    } else {
        j["high_sensitivity"] = nullptr;
    }
    j["buckets"] = to_json(r.buckets);
    return j;
}

MetricsReport metrics_report_from_json(const json& in) {
    const json& j = in.contains("aggregate") ? in.at("aggregate") : in;
    MetricsReport r;
    try {
        for (const auto& [x, v] : j.at("s_at").items()) r.s_at[std::stoi(x)] = v.get<double>();
        if (!r.s_at.count(25)) throw Error(ErrorCode::ParseError, "metrics report lacks S@25");
        r.smape = j.at("smape").get<double>();
        if (const auto& st = j.at("stat_f1"); !st.is_null()) {
            StatusF1 s;
            s.precision = st.at("precision").get<double>();
            s.recall = st.at("recall").get<double>();
            s.f1 = st.at("f1").get<double>();
            s.counts = {st.value("tp", std::size_t{0}), st.value("fp", std::size_t{0}), st.value("fn", std::size_t{0}),
                        st.value("tn", std::size_t{0})};
            s.unranged = st.value("unranged", std::size_t{0});
            r.stat = s;
        }
        if (const auto& l = j.at("label"); !l.is_null()) {
            LabelScores s;
            s.precision = l.at("precision").get<double>();
            s.recall = l.at("recall").get<double>();
            s.f1 = l.at("f1").get<double>();
            s.tp = l.value("tp", std::size_t{0});
            s.fp = l.value("fp", std::size_t{0});
            s.fn = l.value("fn", std::size_t{0});
            r.label = s;
        }
        r.avg_score = j.at("avg_score").get<double>();
        r.n_numeric = j.value("n_numeric", std::size_t{0});
        r.n_label = j.value("n_label", std::size_t{0});
        r.n_undefined_error = j.value("n_undefined_error", std::size_t{0});
        r.n_type_mismatch = j.value("n_type_mismatch", std::size_t{0});
        if (const auto it = j.find("high_sensitivity"); it != j.end() && !it->is_null())
            r.high_sensitivity = HighSensitivityReport{it->at("s_at_25").get<double>(), it->at("smape").get<double>(),
                                                       it->at("n").get<std::size_t>(),
                                                       it->value("zero_baseline_excluded", std::size_t{0})};
        if (const auto it = j.find("buckets"); it != j.end())
            r.buckets = {it->value("precise", std::size_t{0}), it->value("acceptable", std::size_t{0}),
                         it->value("deviation", std::size_t{0}), it->value("undefined", std::size_t{0})};
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::ParseError, std::string("metrics report: ") + ex.what());
    }
    return r;
}

json to_json(const RetentionReport& r) {
    auto e = [](const RetentionEntry& x) {
        json j{{"next", x.next}, {"full", x.full}};
        j["retention_pct"] = x.pct ? json(*x.pct) : json(nullptr);
        j["undefined"] = !x.pct.has_value();
        return j;
    };
    return {{"s25", e(r.s25)}, {"stat_f1", e(r.stat_f1)}, {"label_f1", e(r.label_f1)}, {"overall", e(r.overall)}};
}

namespace {

std::string fixed(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void row(std::ostringstream& out, const std::string& name, const std::string& value) {
    out << "  " << name;
    for (std::size_t i = name.size(); i < 16; ++i) out << ' ';
    out << value << '\n';
}

} // namespace

std::string format_report(const MetricsReport& r) {
    std::ostringstream out;
    out << "metrics\n";
    for (const auto& [x, v] : r.s_at) row(out, "S@" + std::to_string(x), fixed(v));
    row(out, "SMAPE", fixed(r.smape));
    row(out, "Stat F1", r.stat ? fixed(r.stat->f1) : "n/a");
    row(out, "Label F1", r.label ? fixed(r.label->f1) : "n/a");
    row(out, "Avg Score", fixed(r.avg_score));
    row(out, "numeric pairs", std::to_string(r.n_numeric));
    row(out, "label pairs", std::to_string(r.n_label));
    if (r.n_undefined_error) row(out, "undefined err", std::to_string(r.n_undefined_error));
    if (r.n_type_mismatch) row(out, "type mismatch", std::to_string(r.n_type_mismatch));
    if (r.high_sensitivity && r.high_sensitivity->n > 0) {
        const auto& h = *r.high_sensitivity;
        row(out, "HS S@25", fixed(h.s_at_25));
        row(out, "HS SMAPE", fixed(h.smape));
        row(out, "HS n", std::to_string(h.n));
    }
    return out.str();
}

std::string format_retention(const RetentionReport& r) {
    std::ostringstream out;
    out << "retention       next    full    ret%\n";
    auto line = [&](const char* name, const RetentionEntry& e) {
        std::string n = name;
        n.resize(16, ' ');
        out << n << fixed(e.next) << "   " << fixed(e.full) << "   " << (e.pct ? fixed(*e.pct, 1) : "undef") << '\n';
    };
    line("S@25", r.s25);
    line("Stat F1", r.stat_f1);
    line("Label F1", r.label_f1);
    line("Overall", r.overall);
    return out.str();
}

std::string format_buckets(const ErrorBuckets& b) {
    const auto total = b.precise + b.acceptable + b.deviation;
    auto pct = [&](std::size_t n) { return total ? fixed(100.0 * n / total, 1) + "%" : std::string("n/a"); };
    std::ostringstream out;
    out << "error buckets\n";
    row(out, "precise", std::to_string(b.precise) + " (" + pct(b.precise) + ")  <= 10%");
    row(out, "acceptable", std::to_string(b.acceptable) + " (" + pct(b.acceptable) + ")  10-20%");
    row(out, "deviation", std::to_string(b.deviation) + " (" + pct(b.deviation) + ")  > 20%");
    if (b.undefined) row(out, "undefined", std::to_string(b.undefined));
    return out.str();
}

} // namespace trajsim
