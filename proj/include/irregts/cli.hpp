#pragma once

#include <string>
#include <vector>

namespace irregts::cli {

// Entry point shared by the binary and the tests. `args` excludes the
// program name. Returns 0 on success, 1 on configuration/runtime errors,
// 2 on usage errors.
int run_command(const std::vector<std::string>& args);

int run_command(int argc, char** argv);

}  // namespace irregts::cli
