#pragma once
// Backend registry file:
//   {"backends": [
//      {"id": "oracle", "kind": "oracle", "config": {...} | "config_path": "..."},
//      {"id": "llm", "kind": "remote", "config": {...} | "config_path": "..."},
//      {"id": "truth", "kind": "replay", "corpus_path": "..."}]}
// "overrides" (optional) is merged into the loaded config as a JSON merge
// patch. Relative paths resolve against the registry file's directory.

#include "trajsim/outcome_model.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>

namespace trajsim {

std::shared_ptr<const OutcomeModel> make_backend(const nlohmann::json& entry, const std::filesystem::path& base_dir);

BackendRegistry load_backend_registry(const nlohmann::json& j, const std::filesystem::path& base_dir);
BackendRegistry load_backend_registry_file(const std::filesystem::path& path);

} // namespace trajsim
