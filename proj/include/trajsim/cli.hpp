#pragma once
// Command-line entry points. The `trajsim` binary is a thin wrapper around
// run_cli so that tests can drive commands in-process.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime or environment
// error, 4 data validation failure.

#include "trajsim/error.hpp"

#include <string>
#include <vector>

namespace trajsim {

inline constexpr const char* kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kExitData = 4;

int exit_code_for(ErrorCode code);

int run_cli(int argc, const char* const* argv);
// args excludes the program name.
int run_cli(const std::vector<std::string>& args);

} // namespace trajsim
