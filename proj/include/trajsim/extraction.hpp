#pragma once
// Static profile extraction from a discharge note through a chat model.

#include "trajsim/domain.hpp"
#include "trajsim/remote.hpp"

#include <json.hpp>

#include <string>
#include <utility>

namespace trajsim {

struct ExtractedProfile {
    StaticProfile profile;
    DiagnosticProfile diagnostics;
};

// Prompt template followed by a blank line and the note.
std::string build_extraction_prompt(const std::string& tmpl, const std::string& note);

// Validates the reply object against the extraction template and maps it.
// "Basic Information" may be an object or a "Key: value, ..." string.
// Throws Error(SchemaViolation) listing missing or unexpected keys.
ExtractedProfile parse_extraction_reply(const nlohmann::json& reply);

// Throws SchemaViolation, NoStructuredBlock, Transport or Auth.
ExtractedProfile extract_static_profile(const std::string& note, const ChatClient& client, const std::string& tmpl);

} // namespace trajsim
