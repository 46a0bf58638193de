#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tunmix::cli {

// Exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kNumerical = 4,
  kRankDeficient = 5,
};

// Runs one invocation. `args` excludes the program name. Machine-readable
// JSON goes to `out`, human-readable text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tunmix::cli
