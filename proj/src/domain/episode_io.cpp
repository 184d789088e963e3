#include "trajsim/episode_io.hpp"

#include "trajsim/error.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace trajsim {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& what) {
    throw Error(ErrorCode::ParseError, what);
}

const json& require(const json& j, const char* key) {
    if (!j.is_object()) parse_fail(std::string("expected object while reading '") + key + "'");
    auto it = j.find(key);
    if (it == j.end()) parse_fail(std::string("missing key '") + key + "'");
    return *it;
}

std::string text_or_empty(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_string()) parse_fail(std::string("'") + key + "' must be a string");
    return it->get<std::string>();
}

std::string required_text(const json& j, const char* key) {
    const auto& v = require(j, key);
    if (!v.is_string()) parse_fail(std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

Diagnosis diagnosis_from_json(const json& j) {
    if (!j.is_object()) parse_fail("diagnosis must be an object");
    return {text_or_empty(j, "content"), text_or_empty(j, "reason")};
}

json to_json(const Diagnosis& d) {
    return json{{"content", d.content}, {"reason", d.reason}};
}

} // namespace

json to_json(const Timestamp& t) { return t.minutes; }

json to_json(const StaticProfile& p) {
    return json{{"age", p.age},
                {"gender", p.gender},
                {"allergies", p.allergies},
                {"chief_complaint", p.chief_complaint},
                {"history_summary", p.history_summary}};
}

json to_json(const DiagnosticProfile& d) {
    json secondary = json::array();
    for (const auto& s : d.secondary) secondary.push_back(to_json(s));
    return json{{"primary", to_json(d.primary)}, {"secondary", std::move(secondary)}};
}

json to_json(const Action& a) {
    json detail = json::object();
    for (const auto& [k, v] : a.detail) detail[k] = v;
    return json{{"kind", std::string(to_string(a.kind))},
                {"code", a.code},
                {"display_name", a.display_name},
                {"detail", std::move(detail)}};
}

json to_json(const Outcome& o) {
    if (const auto* n = std::get_if<NumericOutcome>(&o))
        return json{{"type", "numeric"}, {"value", n->value}, {"unit", n->unit}};
    if (const auto* l = std::get_if<LabelOutcome>(&o)) {
        json values = json::array();
        for (const auto& v : l->values) values.push_back(v);
        return json{{"type", "label"}, {"values", std::move(values)}};
    }
    return nullptr;
}

json to_json(const Event& e) {
    return json{{"action", to_json(e.action)}, {"outcome", to_json(e.outcome)}};
}

json to_json(const EventSet& s) {
    std::vector<Event> events = s.events;
    sort_canonical(events);
    json arr = json::array();
    for (const auto& e : events) arr.push_back(to_json(e));
    return json{{"timestamp", to_json(s.timestamp)}, {"events", std::move(arr)}};
}

json to_json(const Episode& e) {
    json timeline = json::array();
    for (const auto& s : e.timeline) timeline.push_back(to_json(s));
    return json{{"subject_id", e.subject_id},
                {"admission_id", e.admission_id},
                {"profile", to_json(e.profile)},
                {"diagnostics", to_json(e.diagnostics)},
                {"timeline", std::move(timeline)},
                {"length_of_stay", e.length_of_stay}};
}

StaticProfile static_profile_from_json(const json& j) {
    StaticProfile p;
    const auto& age = require(j, "age");
    if (!age.is_number_integer()) parse_fail("'age' must be an integer");
    p.age = age.get<int>();
    p.gender = text_or_empty(j, "gender");
    p.allergies = text_or_empty(j, "allergies");
    p.chief_complaint = text_or_empty(j, "chief_complaint");
    p.history_summary = text_or_empty(j, "history_summary");
    return p;
}

DiagnosticProfile diagnostic_profile_from_json(const json& j) {
    DiagnosticProfile d;
    d.primary = diagnosis_from_json(require(j, "primary"));
    if (auto it = j.find("secondary"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) parse_fail("'secondary' must be an array");
        for (const auto& s : *it) d.secondary.push_back(diagnosis_from_json(s));
    }
    return d;
}

Action action_from_json(const json& j) {
    Action a;
    a.kind = parse_action_kind(required_text(j, "kind"));
    a.code = required_text(j, "code");
    a.display_name = text_or_empty(j, "display_name");
    if (auto it = j.find("detail"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) parse_fail("'detail' must be an object");
        for (const auto& [k, v] : it->items()) {
            if (!v.is_string()) parse_fail("detail values must be strings");
            a.detail.emplace(k, v.get<std::string>());
        }
    }
    return a;
}

Outcome outcome_from_json(const json& j) {
    if (j.is_null()) return EmptyOutcome{};
    const std::string type = required_text(j, "type");
    if (type == "numeric") {
        const auto& v = require(j, "value");
        if (!v.is_number()) parse_fail("numeric outcome 'value' must be a number");
        return NumericOutcome{v.get<double>(), text_or_empty(j, "unit")};
    }
    if (type == "label") {
        const auto& vals = require(j, "values");
        if (!vals.is_array()) parse_fail("label outcome 'values' must be an array");
        LabelOutcome l;
        for (const auto& v : vals) {
            if (!v.is_string()) parse_fail("label values must be strings");
            l.values.insert(v.get<std::string>());
        }
        return l;
    }
    if (type == "empty") return EmptyOutcome{};
    parse_fail("unknown outcome type '" + type + "'");
}

Event event_from_json(const json& j) {
    return {action_from_json(require(j, "action")), outcome_from_json(require(j, "outcome"))};
}

EventSet event_set_from_json(const json& j) {
    EventSet s;
    const auto& ts = require(j, "timestamp");
    if (!ts.is_number_integer()) parse_fail("'timestamp' must be an integer number of minutes");
    s.timestamp.minutes = ts.get<std::int64_t>();
    const auto& events = require(j, "events");
    if (!events.is_array()) parse_fail("'events' must be an array");
    for (const auto& e : events) s.events.push_back(event_from_json(e));
    return s;
}

Episode episode_from_json(const json& j) {
    Episode e;
    e.subject_id = required_text(j, "subject_id");
    e.admission_id = required_text(j, "admission_id");
    e.profile = static_profile_from_json(require(j, "profile"));
    e.diagnostics = diagnostic_profile_from_json(require(j, "diagnostics"));
    const auto& timeline = require(j, "timeline");
    if (!timeline.is_array()) parse_fail("'timeline' must be an array");
    for (const auto& s : timeline) e.timeline.push_back(event_set_from_json(s));
    const auto& los = require(j, "length_of_stay");
    if (!los.is_number()) parse_fail("'length_of_stay' must be a number");
    e.length_of_stay = los.get<double>();
    return e;
}

std::string serialize_episode(const Episode& e) { return to_json(e).dump(); }

Episode parse_episode(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& ex) {
        parse_fail(std::string("invalid JSON: ") + ex.what());
    }
    return episode_from_json(j);
}

json corpus_header() {
    return json{{"format", kEpisodeFormat}, {"version", kEpisodeFormatVersion}};
}

void write_corpus(std::ostream& out, const std::vector<Episode>& episodes) {
    out << corpus_header().dump() << '\n';
    for (const auto& e : episodes) out << serialize_episode(e) << '\n';
}

std::vector<Episode> read_corpus(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<Episode> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!header_seen) {
            json h;
            try {
                h = json::parse(line);
            } catch (const json::parse_error&) {
                parse_fail("line 1: corpus header is not valid JSON");
            }
            if (!h.is_object() || h.value("format", "") != kEpisodeFormat)
                parse_fail("line 1: missing trajsim-episode header");
            if (h.value("version", 0) != kEpisodeFormatVersion)
                parse_fail("line 1: unsupported corpus version");
            header_seen = true;
            continue;
        }
        try {
            out.push_back(parse_episode(line));
        } catch (const Error& ex) {
            parse_fail("line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    if (!header_seen) parse_fail("corpus is missing its header line");
    return out;
}

void write_corpus_file(const std::filesystem::path& path, const std::vector<Episode>& episodes) {
    std::ostringstream os;
    write_corpus(os, episodes);
    write_text_file(path, os.str());
}

std::vector<Episode> read_corpus_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open corpus '" + path.string() + "'");
    return read_corpus(in);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

json read_json_file(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& ex) {
        throw Error(ErrorCode::ConfigError, "'" + path.string() + "' is not valid JSON: " + ex.what());
    }
}

} // namespace trajsim
