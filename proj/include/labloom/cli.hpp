#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace labloom {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // validation or run failure
inline constexpr int kExitUsage = 2;    // bad arguments or unreadable files

/// Entry point of the `labloom` tool; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace labloom
