#pragma once

#include <string>
#include <vector>

namespace sssbathy {

/// Entry point of the `sssbathy` tool. `args[0]` is the program name.
/// Returns the process exit code: 0 on success, 1 on a failed run, 2 on a
/// command-line error. Failures print one diagnostic line to stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace sssbathy
