#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace avvp::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 2,
  kData = 3,
  kInvariant = 4,
};

/// Name of the environment variable holding the default data directory.
inline constexpr const char* kDataDirEnv = "AVVP_DATA_DIR";

/// Runs one invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace avvp::cli
