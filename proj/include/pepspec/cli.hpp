#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace pepspec {

inline constexpr std::string_view kToolName = "pepspec";
inline constexpr std::string_view kToolVersion = "0.1.0";

// Exit status: 0 on success, 2 on any error (error JSON written to err).
inline constexpr int kExitError = 2;

// Runs one command line. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace pepspec
