#include "trajsim/backend_config.hpp"

#include "trajsim/episode_io.hpp"
#include "trajsim/error.hpp"
#include "trajsim/oracle.hpp"
#include "trajsim/remote.hpp"
#include "trajsim/replay.hpp"

namespace trajsim {

using nlohmann::json;

void BackendRegistry::add(std::shared_ptr<const OutcomeModel> backend) {
    const auto id = backend->id();
    if (!backends_.emplace(id, std::move(backend)).second)
        throw Error(ErrorCode::ConfigError, "duplicate backend id '" + id + "'");
}

std::shared_ptr<const OutcomeModel> BackendRegistry::get(const std::string& id) const {
    auto it = backends_.find(id);
    if (it == backends_.end()) throw Error(ErrorCode::UnknownBackend, "unknown backend '" + id + "'");
    return it->second;
}

std::vector<std::string> BackendRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : backends_) out.push_back(id);
    return out;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

json load_section(const json& entry, const std::filesystem::path& base_dir, std::filesystem::path& section_dir) {
    section_dir = base_dir;
    if (auto it = entry.find("config"); it != entry.end()) return *it;
    if (auto it = entry.find("config_path"); it != entry.end()) {
        const auto path = resolve(base_dir, it->get<std::string>());
        section_dir = path.parent_path();
        return read_json_file(path);
    }
    throw Error(ErrorCode::ConfigError, "backend entry needs 'config' or 'config_path'");
}

// "overrides" is applied as a JSON merge patch on top of the loaded config.
json section(const json& entry, const std::filesystem::path& base_dir, std::filesystem::path& section_dir) {
    auto cfg = load_section(entry, base_dir, section_dir);
    if (auto it = entry.find("overrides"); it != entry.end()) cfg.merge_patch(*it);
    return cfg;
}

} // namespace

std::shared_ptr<const OutcomeModel> make_backend(const json& entry, const std::filesystem::path& base_dir) {
    if (!entry.is_object() || !entry.contains("id") || !entry.contains("kind"))
        throw Error(ErrorCode::ConfigError, "backend entry needs 'id' and 'kind'");
    const auto id = entry["id"].get<std::string>();
    const auto kind = entry["kind"].get<std::string>();
    std::filesystem::path dir;
    if (kind == "oracle") return std::make_shared<OracleBackend>(id, oracle_config_from_json(section(entry, base_dir, dir)));
    if (kind == "remote") {
        auto cfg_json = section(entry, base_dir, dir);
        return std::make_shared<RemoteBackend>(id, remote_config_from_json(cfg_json, dir));
    }
    if (kind == "replay") {
        if (!entry.contains("corpus_path")) throw Error(ErrorCode::ConfigError, "replay backend needs 'corpus_path'");
        return std::make_shared<ReplayBackend>(id, read_corpus_file(resolve(base_dir, entry["corpus_path"].get<std::string>())));
    }
    throw Error(ErrorCode::ConfigError, "unknown backend kind '" + kind + "'");
}

BackendRegistry load_backend_registry(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object() || !j.contains("backends") || !j["backends"].is_array())
        throw Error(ErrorCode::ConfigError, "backend registry needs a 'backends' array");
    BackendRegistry registry;
    for (const auto& entry : j["backends"]) registry.add(make_backend(entry, base_dir));
    return registry;
}

BackendRegistry load_backend_registry_file(const std::filesystem::path& path) {
    return load_backend_registry(read_json_file(path), path.parent_path());
}

} // namespace trajsim
