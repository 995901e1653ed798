#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace calibra {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitWarnings = 2 };

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

/// Runs the command line `args` (args[0] is the program name). Diagnostics go
/// to `err`; short summaries to `out`. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace calibra
