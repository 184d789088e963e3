#pragma once
// Prompt rendering and reply parsing for language-model simulators.
//
// Templates are plain text with {{placeholder}} markers. Recognized names:
// profile, diagnostics, history, now, actions, output_schema.

#include "trajsim/domain.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trajsim {

inline constexpr std::string_view kEmptyHistorySentinel = "no prior events";

struct PromptOptions {
    // Most recent event sets kept in the history section; older ones are
    // summarized by a count line.
    std::size_t max_history = 64;
};

const std::string& default_simulator_template();

std::string render_profile(const StaticProfile& profile);
std::string render_diagnostics(const DiagnosticProfile& diagnostics);
std::string render_history(std::span<const EventSet> history, std::size_t max_history);
std::string render_actions(std::span<const Action> actions);
std::string render_output_schema(std::size_t action_count);

// Throws Error(UnknownPlaceholder).
std::string render_prompt(std::string_view tmpl, const PatientState& state, std::span<const Action> actions,
                          const PromptOptions& options = {});

// Returns the text of the first JSON object found in `reply`, preferring a
// fenced ```json block. Throws Error(NoStructuredBlock).
std::string extract_structured_block(std::string_view reply);

// Maps each numbered entry of the reply's structured block onto the action
// at that position. Throws NoStructuredBlock, CountMismatch or TypeMismatch.
std::vector<Outcome> parse_model_reply(std::string_view reply, std::span<const Action> actions);

} // namespace trajsim
