#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dcoh {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

/// Environment variable naming the default config file (TOML/INI sections
/// per subcommand, e.g. "[train]\nhidden=64").
inline constexpr const char* kConfigEnv = "DCOH_CONFIG";

/// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dcoh
