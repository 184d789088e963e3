#include "trajsim/extraction.hpp"

#include "trajsim/error.hpp"
#include "trajsim/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

namespace trajsim {

using nlohmann::json;

namespace {

const std::set<std::string> kTopKeys{"Basic Information", "History Information", "Diagnosis Results"};
const std::set<std::string> kDiagnosisKeys{"Primary Diagnosis", "Secondary Diagnoses"};

std::string trim(std::string s) {
    const auto keep = [](unsigned char c) { return !std::isspace(c) && c != ',' && c != ';'; };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), keep));
    s.erase(std::find_if(s.rbegin(), s.rend(), keep).base(), s.end());
    return s;
}

std::string text_of(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return {};
    return v.dump();
}

void check_keys(const json& obj, const std::set<std::string>& expected, const std::string& where) {
    std::vector<std::string> missing, extra;
    for (const auto& k : expected)
        if (!obj.contains(k)) missing.push_back(k);
    for (const auto& [k, v] : obj.items())
        if (!expected.count(k)) extra.push_back(k);
    if (missing.empty() && extra.empty()) return;
    std::string msg = where.empty() ? "reply" : where;
    auto list = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& k : v) s += (s.empty() ? "'" : ", '") + k + "'";
        return s;
    };
    if (!missing.empty()) msg += ": missing " + list(missing);
    if (!extra.empty()) msg += (missing.empty() ? ": " : "; ") + std::string("unexpected ") + list(extra);
    throw Error(ErrorCode::SchemaViolation, msg);
}

Diagnosis diagnosis_from(const json& j, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, where + " must be an object");
    if (!j.contains("Content")) throw Error(ErrorCode::SchemaViolation, where + ": missing 'Content'");
    return {text_of(j.at("Content")), j.contains("Reason") ? text_of(j.at("Reason")) : std::string()};
}

// Case-insensitive lookup of the first matching key.
const json* field(const json& obj, std::initializer_list<const char*> names) {
    for (const auto& [k, v] : obj.items()) {
        std::string lk = k;
        std::transform(lk.begin(), lk.end(), lk.begin(), [](unsigned char c) { return std::tolower(c); });
        for (const char* n : names)
            if (lk == n) return &v;
    }
    return nullptr;
}

// "Age: 67, Gender: F, Allergy History: none, Chief Complaint: chest pain"
json basic_from_text(const std::string& text) {
    static const std::regex key(R"((age|gender|sex|allergy history|allergies|chief complaint)\s*:)",
                                std::regex::icase);
    json out = json::object();
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> hits;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), key); it != std::sregex_iterator(); ++it)
        hits.push_back({(*it)[1].str(), {static_cast<std::size_t>(it->position()),
                                         static_cast<std::size_t>(it->position() + it->length())}});
    for (std::size_t i = 0; i < hits.size(); ++i) {
        const auto end = i + 1 < hits.size() ? hits[i + 1].second.first : text.size();
        std::string name = hits[i].first;
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        out[name] = trim(text.substr(hits[i].second.second, end - hits[i].second.second));
    }
    return out;
}

StaticProfile profile_from(const json& basic) {
    const json obj = basic.is_string() ? basic_from_text(basic.get<std::string>()) : basic;
    if (!obj.is_object())
        throw Error(ErrorCode::SchemaViolation, "'Basic Information' must be a string or an object");
    StaticProfile p;
    const json* age = field(obj, {"age"});
    if (!age) throw Error(ErrorCode::SchemaViolation, "'Basic Information': missing 'Age'");
    if (age->is_number()) {
        p.age = static_cast<int>(age->get<double>());
    } else {
        static const std::regex digits(R"(\d+)");
        std::smatch m;
        const auto s = text_of(*age);
        if (!std::regex_search(s, m, digits))
            throw Error(ErrorCode::SchemaViolation, "'Basic Information': 'Age' has no number");
        p.age = std::stoi(m.str());
    }
    if (const json* g = field(obj, {"gender", "sex"})) p.gender = text_of(*g);
    if (const json* a = field(obj, {"allergy history", "allergies"})) p.allergies = text_of(*a);
    if (const json* c = field(obj, {"chief complaint"})) p.chief_complaint = text_of(*c);
    return p;
}

} // namespace

std::string build_extraction_prompt(const std::string& tmpl, const std::string& note) {
    std::string out = tmpl;
    while (!out.empty() && (out.back() == '\n' || out.back() == ' ')) out.pop_back();
    return out + "\n\n" + note + "\n";
}

ExtractedProfile parse_extraction_reply(const json& reply) {
    if (!reply.is_object()) throw Error(ErrorCode::SchemaViolation, "reply must be a JSON object");
    check_keys(reply, kTopKeys, "");
    const auto& dx = reply.at("Diagnosis Results");
    if (!dx.is_object()) throw Error(ErrorCode::SchemaViolation, "'Diagnosis Results' must be an object");
    check_keys(dx, kDiagnosisKeys, "'Diagnosis Results'");

    ExtractedProfile out;
    out.profile = profile_from(reply.at("Basic Information"));
    out.profile.history_summary = text_of(reply.at("History Information"));
    out.diagnostics.primary = diagnosis_from(dx.at("Primary Diagnosis"), "'Primary Diagnosis'");
    const auto& secondary = dx.at("Secondary Diagnoses");
    if (!secondary.is_array()) throw Error(ErrorCode::SchemaViolation, "'Secondary Diagnoses' must be a list");
    for (const auto& d : secondary) out.diagnostics.secondary.push_back(diagnosis_from(d, "'Secondary Diagnoses' entry"));
    if (out.profile.age < 0 || out.profile.age > 130)
        throw Error(ErrorCode::SchemaViolation, "'Basic Information': age out of range");
    return out;
}

ExtractedProfile extract_static_profile(const std::string& note, const ChatClient& client, const std::string& tmpl) {
    const auto reply = client.complete(build_extraction_prompt(tmpl, note));
    const auto block = extract_structured_block(reply);
    json j;
    try {
        j = json::parse(block);
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::SchemaViolation, std::string("reply block is not JSON: ") + ex.what());
    }
    return parse_extraction_reply(j);
}

} // namespace trajsim
