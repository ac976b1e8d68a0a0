#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace logonet {

/// Entry point of the `logonet` command. `args` excludes the program name.
/// Returns 0 on success, 1 on runtime failure and 2 on usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace logonet
