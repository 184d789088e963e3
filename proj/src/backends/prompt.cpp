#include "trajsim/prompt.hpp"

#include "trajsim/error.hpp"

#include <json.hpp>

#include <cmath>
#include <optional>
#include <cctype>
#include <charconv>
#include <sstream>

namespace trajsim {

using nlohmann::json;

namespace {

std::string format_number(double v) { return json(v).dump(); }

std::string format_time(Timestamp t) { return "t+" + std::to_string(t.minutes) + " min"; }

std::string format_detail(const Action& a) {
    std::string out;
    for (const auto& [k, v] : a.detail) {
        if (k == "category") continue;
        out += out.empty() ? " {" : ", ";
        out += k + ": " + v;
    }
    if (!out.empty()) out += "}";
    return out;
}

std::string format_outcome(const Outcome& o) {
    if (const auto* n = std::get_if<NumericOutcome>(&o))
        return format_number(n->value) + (n->unit.empty() ? "" : " " + n->unit);
    if (const auto* l = std::get_if<LabelOutcome>(&o)) {
        std::string out = "[";
        bool first = true;
        for (const auto& v : l->values) {
            if (!first) out += ", ";
            out += v;
            first = false;
        }
        return out + "]";
    }
    return "(no value)";
}

std::string kind_tag(ActionKind kind) { return kind == ActionKind::Inquiry ? "INQUIRY" : "INTERVENTION"; }

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Balanced-brace scan starting at an opening brace; string-aware.
std::optional<std::string_view> balanced_object(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false, escaped = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return text.substr(open, i - open + 1);
    }
    return std::nullopt;
}

std::optional<std::string> first_object_in(std::string_view text) {
    for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
        auto candidate = balanced_object(text, pos);
        if (!candidate) continue;
        auto parsed = json::parse(*candidate, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return std::string(*candidate);
    }
    return std::nullopt;
}

[[noreturn]] void type_mismatch(std::size_t index, const std::string& what) {
    throw Error(ErrorCode::TypeMismatch, "entry " + std::to_string(index) + ": " + what);
}

// "3.9 mEq/L" -> (3.9, "mEq/L").
std::optional<NumericOutcome> parse_numeric_text(std::string_view text) {
    const std::string s = trim(text);
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (begin != end && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr == begin || !std::isfinite(value)) return std::nullopt;
    return NumericOutcome{value, trim(std::string_view(ptr, static_cast<std::size_t>(end - ptr)))};
}

Outcome inquiry_outcome(const json& entry, std::size_t index) {
    if (entry.is_number()) {
        const double v = entry.get<double>();
        if (!std::isfinite(v)) type_mismatch(index, "value must be finite");
        return NumericOutcome{v, ""};
    }
    auto label_from = [&](const json& arr) {
        LabelOutcome label;
        for (const auto& t : arr) {
            if (!t.is_string()) type_mismatch(index, "label values must be strings");
            try {
                label.values.insert(canonicalize_code(t.get<std::string>()));
            } catch (const Error&) {
                type_mismatch(index, "label values must be non-empty");
            }
        }
        return label;
    };
    if (entry.is_array()) return label_from(entry);
    if (!entry.is_object()) type_mismatch(index, "inquiry requires a value or labels");
    for (const char* key : {"labels", "values"}) {
        if (auto it = entry.find(key); it != entry.end()) {
            if (!it->is_array()) type_mismatch(index, std::string("'") + key + "' must be an array");
            return label_from(*it);
        }
    }
    auto it = entry.find("value");
    if (it == entry.end() || it->is_null()) type_mismatch(index, "inquiry requires a value or labels");
    std::string unit;
    if (auto u = entry.find("unit"); u != entry.end() && !u->is_null()) {
        if (!u->is_string()) type_mismatch(index, "'unit' must be a string");
        unit = u->get<std::string>();
    }
    if (it->is_number()) {
        const double v = it->get<double>();
        if (!std::isfinite(v)) type_mismatch(index, "value must be finite");
        return NumericOutcome{v, unit};
    }
    if (it->is_string()) {
        auto parsed = parse_numeric_text(it->get<std::string>());
        if (!parsed) type_mismatch(index, "expected a number, got '" + it->get<std::string>() + "'");
        if (!unit.empty()) parsed->unit = unit;
        return *parsed;
    }
    type_mismatch(index, "value must be a number");
}

bool is_empty_entry(const json& entry) {
    if (entry.is_null()) return true;
    if (entry.is_object()) {
        for (const auto& [k, v] : entry.items())
            if (!v.is_null()) return false;
        return true;
    }
    return false;
}

} // namespace

const std::string& default_simulator_template() {
    static const std::string tmpl =
        "You are simulating the evolving state of a hospitalized patient.\n"
        "Given the patient's profile, diagnoses and the clinical events so far, predict the result of each "
        "new order placed at the current time.\n"
        "\n"
        "# Patient profile\n{{profile}}\n\n"
        "# Diagnoses for this stay\n{{diagnostics}}\n\n"
        "# Clinical history (chronological)\n{{history}}\n\n"
        "# Current time\n{{now}}\n\n"
        "# New orders\n{{actions}}\n\n"
        "# Output format\n{{output_schema}}\n";
    return tmpl;
}

std::string render_profile(const StaticProfile& p) {
    std::ostringstream os;
    os << "Age: " << p.age << "\n"
       << "Gender: " << p.gender << "\n"
       << "Allergies: " << p.allergies << "\n"
       << "Chief complaint: " << p.chief_complaint << "\n"
       << "History: " << p.history_summary;
    return os.str();
}

std::string render_diagnostics(const DiagnosticProfile& d) {
    std::ostringstream os;
    os << "Primary: " << d.primary.content;
    if (!d.primary.reason.empty()) os << " (" << d.primary.reason << ")";
    os << "\nSecondary:";
    if (d.secondary.empty()) os << " none";
    for (const auto& s : d.secondary) {
        os << "\n- " << s.content;
        if (!s.reason.empty()) os << " (" << s.reason << ")";
    }
    return os.str();
}

std::string render_history(std::span<const EventSet> history, std::size_t max_history) {
    if (history.empty()) return std::string(kEmptyHistorySentinel);
    std::ostringstream os;
    std::size_t first = 0;
    if (history.size() > max_history) {
        first = history.size() - max_history;
        os << "(" << first << " earlier event sets omitted)\n";
    }
    for (std::size_t i = first; i < history.size(); ++i) {
        const auto& set = history[i];
        os << "[" << format_time(set.timestamp) << "]";
        for (std::size_t j = 0; j < set.events.size(); ++j) {
            const auto& ev = set.events[j];
            os << (j ? "; " : " ") << kind_tag(ev.action.kind) << " " << ev.action.code << format_detail(ev.action)
               << " -> " << format_outcome(ev.outcome);
        }
        if (i + 1 < history.size()) os << "\n";
    }
    return os.str();
}

std::string render_actions(std::span<const Action> actions) {
    std::ostringstream os;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        const auto& a = actions[i];
        os << (i + 1) << ". [" << kind_tag(a.kind) << "] " << a.code;
        if (!a.display_name.empty() && a.display_name != a.code) os << " (" << a.display_name << ")";
        os << format_detail(a);
        if (i + 1 < actions.size()) os << "\n";
    }
    return os.str();
}

std::string render_output_schema(std::size_t action_count) {
    std::ostringstream os;
    os << "Reply with exactly one JSON object with one entry per order, keyed by the order number (\"1\" to \""
       << action_count << "\").\n"
       << "- INQUIRY with a measured value: {\"value\": <number>, \"unit\": \"<unit>\"}\n"
       << "- INQUIRY with categorical findings: {\"labels\": [\"<finding>\", ...]}\n"
       << "- INTERVENTION: null (interventions produce no immediate result)\n"
       << "Example: {\"1\": {\"value\": 4.1, \"unit\": \"mEq/L\"}, \"2\": null}";
    return os.str();
}

std::string render_prompt(std::string_view tmpl, const PatientState& state, std::span<const Action> actions,
                          const PromptOptions& options) {
    std::string out;
    out.reserve(tmpl.size() + 1024);
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos)
            throw Error(ErrorCode::UnknownPlaceholder, "unterminated placeholder in template");
        out.append(tmpl.substr(pos, open - pos));
        const std::string name = trim(tmpl.substr(open + 2, close - open - 2));
        if (name == "profile") out += render_profile(state.profile);
        else if (name == "diagnostics") out += render_diagnostics(state.diagnostics);
        else if (name == "history") out += render_history(state.history, options.max_history);
        else if (name == "now") out += format_time(state.now);
        else if (name == "actions") out += render_actions(actions);
        else if (name == "output_schema") out += render_output_schema(actions.size());
        else throw Error(ErrorCode::UnknownPlaceholder, "unknown placeholder '{{" + name + "}}'");
        pos = close + 2;
    }
    return out;
}

std::string extract_structured_block(std::string_view reply) {
    for (std::size_t fence = reply.find("```"); fence != std::string_view::npos;) {
        const auto body_start = reply.find('\n', fence);
        if (body_start == std::string_view::npos) break;
        const auto fence_end = reply.find("```", body_start);
        if (fence_end == std::string_view::npos) break;
        if (auto obj = first_object_in(reply.substr(body_start, fence_end - body_start))) return *obj;
        fence = reply.find("```", fence_end + 3);
    }
    if (auto obj = first_object_in(reply)) return *obj;
    throw Error(ErrorCode::NoStructuredBlock, "reply contains no JSON object");
}

std::vector<Outcome> parse_model_reply(std::string_view reply, std::span<const Action> actions) {
    json block = json::parse(extract_structured_block(reply));
    if (block.size() == 1 && block.contains("results") && block["results"].is_object()) block = block["results"];

    const std::size_t n = actions.size();
    if (block.size() != n)
        throw Error(ErrorCode::CountMismatch,
                    "reply has " + std::to_string(block.size()) + " entries for " + std::to_string(n) + " actions");
    std::vector<Outcome> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto key = std::to_string(i + 1);
        auto it = block.find(key);
        if (it == block.end()) throw Error(ErrorCode::CountMismatch, "reply has no entry \"" + key + "\"");
        if (actions[i].kind == ActionKind::Intervention) {
            if (!is_empty_entry(*it)) type_mismatch(i + 1, "intervention '" + actions[i].code + "' must map to null");
            out.emplace_back(EmptyOutcome{});
        } else {
            out.push_back(inquiry_outcome(*it, i + 1));
        }
    }
    return out;
}

} // namespace trajsim
