#pragma once
// Newline-delimited JSON encoding of episodes.
//
// A corpus file starts with the header line
//   {"format":"trajsim-episode","version":1}
// followed by one Episode object per line. Events inside each event set are
// written in canonical order and object keys are sorted, so the same logical
// episode always serializes to the same bytes.

#include "trajsim/domain.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace trajsim {

inline constexpr const char* kEpisodeFormat = "trajsim-episode";
inline constexpr int kEpisodeFormatVersion = 1;

nlohmann::json to_json(const Timestamp& t);
nlohmann::json to_json(const StaticProfile& p);
nlohmann::json to_json(const DiagnosticProfile& d);
nlohmann::json to_json(const Action& a);
nlohmann::json to_json(const Outcome& o);  // Empty encodes as null
nlohmann::json to_json(const Event& e);
nlohmann::json to_json(const EventSet& s);
nlohmann::json to_json(const Episode& e);

StaticProfile static_profile_from_json(const nlohmann::json& j);
DiagnosticProfile diagnostic_profile_from_json(const nlohmann::json& j);
Action action_from_json(const nlohmann::json& j);
Outcome outcome_from_json(const nlohmann::json& j);
Event event_from_json(const nlohmann::json& j);
EventSet event_set_from_json(const nlohmann::json& j);
Episode episode_from_json(const nlohmann::json& j);

std::string serialize_episode(const Episode& e);
Episode parse_episode(std::string_view line);

nlohmann::json corpus_header();

void write_corpus(std::ostream& out, const std::vector<Episode>& episodes);
std::vector<Episode> read_corpus(std::istream& in);

void write_corpus_file(const std::filesystem::path& path, const std::vector<Episode>& episodes);
std::vector<Episode> read_corpus_file(const std::filesystem::path& path);

// Whole-file helpers shared by the CLI and the service.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);
nlohmann::json read_json_file(const std::filesystem::path& path);

} // namespace trajsim
