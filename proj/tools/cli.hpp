#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace edgectl::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kInvariantBreach = 3, kIoError = 4 };

/// Runs the command line; args excludes the program name.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace edgectl::cli
