#include "trajsim/pipeline.hpp"

#include "trajsim/episode_io.hpp"
#include "trajsim/error.hpp"
#include "trajsim/validation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <set>
#include <sstream>
#include <tuple>

namespace trajsim {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxMessages = 20;

void note(AssemblyReport& r, std::string msg) {
    if (r.messages.size() < kMaxMessages) r.messages.push_back(std::move(msg));
}

std::string id_field(const json& row, const char* key) {
    const auto it = row.find(key);
    if (it == row.end()) throw Error(ErrorCode::MalformedRow, std::string("missing '") + key + "'");
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
    throw Error(ErrorCode::MalformedRow, std::string("'") + key + "' must be a string or integer");
}

std::string string_field(const json& row, const char* key) {
    const auto it = row.find(key);
    if (it == row.end() || !it->is_string())
        throw Error(ErrorCode::MalformedRow, std::string("missing string '") + key + "'");
    return it->get<std::string>();
}

std::string detail_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string number_text(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

struct Row {
    std::string subject_id;
    std::string admission_id;
    Timestamp timestamp;
    Event event;
};

Row parse_row(const json& row) {
    if (!row.is_object()) throw Error(ErrorCode::MalformedRow, "row is not an object");
    Row r;
    r.subject_id = id_field(row, "subject_id");
    r.admission_id = id_field(row, "admission_id");
    const auto ts = row.find("timestamp");
    if (ts == row.end() || !ts->is_number_integer() || ts->get<std::int64_t>() < 0)
        throw Error(ErrorCode::MalformedRow, "'timestamp' must be a non-negative integer of minutes");
    r.timestamp = Timestamp{ts->get<std::int64_t>()};

    auto& action = r.event.action;
    try {
        action.kind = parse_action_kind(string_field(row, "kind"));
        action.code = canonicalize_code(string_field(row, "code"));
    } catch (const Error& ex) {
        throw Error(ErrorCode::MalformedRow, ex.what());
    }
    action.display_name = row.value("display_name", string_field(row, "code"));
    if (const auto d = row.find("detail"); d != row.end()) {
        if (!d->is_object()) throw Error(ErrorCode::MalformedRow, "'detail' must be an object");
        for (const auto& [k, v] : d->items()) action.detail[k] = detail_text(v);
    }
    try {
        action.detail["category"] = canonicalize_code(string_field(row, "category"));
    } catch (const Error& ex) {
        throw Error(ErrorCode::MalformedRow, ex.what());
    }

    const auto value = row.find("value");
    const std::string unit = row.value("unit", "");
    if (action.kind == ActionKind::Intervention) {
        r.event.outcome = EmptyOutcome{};
        if (value != row.end() && !value->is_null()) {
            std::string dose = value->is_number() ? number_text(value->get<double>()) : detail_text(*value);
            if (!unit.empty()) dose += " " + unit;
            action.detail["dose"] = dose;
        }
        return r;
    }
    if (const auto labels = row.find("labels"); labels != row.end()) {
        if (!labels->is_array()) throw Error(ErrorCode::MalformedRow, "'labels' must be an array");
        LabelOutcome out;
        for (const auto& l : *labels) {
            if (!l.is_string()) throw Error(ErrorCode::MalformedRow, "labels must be strings");
            try {
                out.values.insert(canonicalize_code(l.get<std::string>()));
            } catch (const Error&) {
                // blank label tokens carry nothing
            }
        }
        r.event.outcome = std::move(out);
        return r;
    }
    if (value == row.end() || value->is_null())
        throw Error(ErrorCode::MalformedRow, "inquiry row needs 'value' or 'labels'");
    double v = 0.0;
    if (value->is_number()) {
        v = value->get<double>();
    } else if (value->is_string()) {
        try {
            std::size_t used = 0;
            v = std::stod(value->get<std::string>(), &used);
        } catch (const std::exception&) {
            throw Error(ErrorCode::MalformedRow, "non-numeric inquiry value");
        }
    } else {
        throw Error(ErrorCode::MalformedRow, "non-numeric inquiry value");
    }
    if (!std::isfinite(v)) throw Error(ErrorCode::MalformedRow, "non-finite inquiry value");
    r.event.outcome = NumericOutcome{v, unit};
    return r;
}

struct StaticRecord {
    std::string subject_id;
    StaticProfile profile;
    DiagnosticProfile diagnostics;
    std::optional<double> length_of_stay;
};

struct Pending {
    std::string subject_id;
    std::map<Timestamp, std::vector<Event>> sets;
};

} // namespace

json AssemblyReport::to_json() const {
    return {{"static_records", static_records},
            {"rows_read", rows_read},
            {"malformed_rows", malformed_rows},
            {"not_executed", not_executed},
            {"duplicates_removed", duplicates_removed},
            {"admissions_without_static", admissions_without_static},
            {"invalid_episodes", invalid_episodes},
            {"episodes", episodes},
            {"messages", messages}};
}

std::vector<Episode> assemble_episodes(std::istream& static_records, std::istream& event_rows,
                                       AssemblyReport* report) {
    AssemblyReport local;
    AssemblyReport& rep = report ? *report : local;
    rep = AssemblyReport{};

    std::map<std::string, StaticRecord> statics;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(static_records, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            StaticRecord rec;
            rec.subject_id = id_field(j, "subject_id");
            const auto admission = id_field(j, "admission_id");
            rec.profile = static_profile_from_json(j.at("profile"));
            rec.diagnostics = diagnostic_profile_from_json(j.at("diagnostics"));
            if (j.contains("length_of_stay")) rec.length_of_stay = j.at("length_of_stay").get<double>();
            statics[admission] = std::move(rec);
            ++rep.static_records;
        } catch (const std::exception& ex) {
            ++rep.malformed_rows;
            note(rep, "static line " + std::to_string(line_no) + ": " + ex.what());
        }
    }

    std::map<std::string, Pending> admissions;
    std::set<std::string> seen;
    line_no = 0;
    while (std::getline(event_rows, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++rep.rows_read;
        json j;
        try {
            j = json::parse(line);
            if (!j.is_object()) throw Error(ErrorCode::MalformedRow, "row is not an object");
        } catch (const std::exception& ex) {
            ++rep.malformed_rows;
            note(rep, "event line " + std::to_string(line_no) + ": " + ex.what());
            continue;
        }
        if (j.value("status", "") != "executed") {
            ++rep.not_executed;
            continue;
        }
        try {
            auto row = parse_row(j);
            const auto key = row.admission_id + '\x1f' + std::to_string(row.timestamp.minutes) + '\x1f' +
                             to_json(row.event).dump();
            if (!seen.insert(key).second) {
                ++rep.duplicates_removed;
                continue;
            }
            auto& adm = admissions[row.admission_id];
            if (adm.subject_id.empty()) adm.subject_id = row.subject_id;
            else if (adm.subject_id != row.subject_id)
                throw Error(ErrorCode::MalformedRow, "admission " + row.admission_id + " seen under two subjects");
            adm.sets[row.timestamp].push_back(std::move(row.event));
        } catch (const Error& ex) {
            ++rep.malformed_rows;
            note(rep, "event line " + std::to_string(line_no) + ": " + ex.what());
        }
    }

    std::vector<Episode> out;
    for (auto& [admission_id, adm] : admissions) {
        const auto it = statics.find(admission_id);
        if (it == statics.end()) {
            ++rep.admissions_without_static;
            continue;
        }
        Episode e;
        e.subject_id = it->second.subject_id;
        e.admission_id = admission_id;
        e.profile = it->second.profile;
        e.diagnostics = it->second.diagnostics;
        for (auto& [ts, events] : adm.sets) {
            sort_canonical(events);
            e.timeline.push_back({ts, std::move(events)});
        }
        e.length_of_stay = it->second.length_of_stay.value_or(
            e.timeline.empty() ? 0.0 : e.timeline.back().timestamp.days());
        const auto v = validate_episode(e);
        if (!v.ok()) {
            ++rep.invalid_episodes;
            note(rep, "episode " + admission_id + ": " + format_violations(v.violations));
            continue;
        }
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const Episode& a, const Episode& b) {
        return std::tie(a.subject_id, a.admission_id) < std::tie(b.subject_id, b.admission_id);
    });
    rep.episodes = out.size();
    return out;
}

} // namespace trajsim
