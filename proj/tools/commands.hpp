#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace avsd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Parses `args` (without the program name) and runs one subcommand.
/// Payload goes to `out` unless --out names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace avsd::cli
