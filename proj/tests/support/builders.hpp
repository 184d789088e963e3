#pragma once
// Small constructors for hand-built test data.

#include "trajsim/domain.hpp"
#include "trajsim/episode_io.hpp"
#include "trajsim/oracle.hpp"

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

namespace testing_support {

using namespace trajsim;

inline Action inquiry(std::string code) { return Action{ActionKind::Inquiry, std::move(code), "", {}}; }
inline Action intervention(std::string code) { return Action{ActionKind::Intervention, std::move(code), "", {}}; }

inline Event numeric(std::string code, double value, std::string unit = "u") {
    return Event{inquiry(std::move(code)), NumericOutcome{value, std::move(unit)}};
}

inline Event labels(std::string code, std::set<std::string> values) {
    return Event{inquiry(std::move(code)), LabelOutcome{std::move(values)}};
}

inline Event given(std::string code) { return Event{intervention(std::move(code)), EmptyOutcome{}}; }

inline EventSet at(std::int64_t minutes, std::vector<Event> events) {
    return EventSet{Timestamp{minutes}, std::move(events)};
}

inline StaticProfile profile(int age = 60) { return StaticProfile{age, "F", "none", "fever", ""}; }

inline DiagnosticProfile diagnostics(std::string primary = "sepsis") {
    return DiagnosticProfile{Diagnosis{std::move(primary), "cultures"}, {}};
}

inline Episode episode(std::string subject, std::string admission, std::vector<EventSet> timeline,
                       double los_days = -1.0, std::string primary = "sepsis") {
    Episode e;
    e.subject_id = std::move(subject);
    e.admission_id = std::move(admission);
    e.profile = profile();
    e.diagnostics = diagnostics(std::move(primary));
    e.timeline = std::move(timeline);
    e.length_of_stay = los_days >= 0.0 ? los_days : (e.timeline.empty() ? 0.0 : e.timeline.back().timestamp.days());
    return e;
}

// Two analytes, one intervention per analyte and one label rule.
inline OracleConfig small_oracle(double sigma = 0.0) {
    OracleConfig cfg;
    cfg.analytes["sodium"] = {140.0, "mEq/L", 0.05};
    cfg.analytes["potassium"] = {4.2, "mEq/L", 0.1};
    cfg.analytes["wbc"] = {8.0, "K/uL", 0.0};
    cfg.interventions["normal saline bolus"] = {{"sodium", 4.0}};
    cfg.interventions["potassium chloride"] = {{"potassium", 0.6}};
    cfg.interventions["infection"] = {{"wbc", 7.0}};
    cfg.label_rules["blood culture"] = {"wbc", 11.0, {"culture positive"}, {"no growth"}};
    cfg.noise_sigma = sigma;
    cfg.seed = 11;
    return cfg;
}

inline std::filesystem::path config_dir() { return TRAJSIM_TEST_CONFIG_DIR; }
inline std::filesystem::path asset_dir() { return TRAJSIM_TEST_ASSET_DIR; }

inline OracleConfig default_oracle() {
    return oracle_config_from_json(read_json_file(config_dir() / "oracle_default.json"));
}

// Fresh directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "trajsim-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace testing_support
