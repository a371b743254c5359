#pragma once

#include <string>
#include <vector>

namespace prif::cli {

/// Exit codes returned by run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one `prif` invocation. args[0] is the program name. Progress and
/// results go to stdout as one JSON object per line; usage text and error
/// messages go to stderr.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace prif::cli
