#pragma once

#include <string>
#include <vector>

namespace epd::cli {

// Entry point shared by the `epdiff` binary and the in-process CLI tests.
// args excludes the program name. Returns the process exit code: 0 on
// success, 2 on configuration/usage errors, 3 on data or model errors.
int run(const std::vector<std::string>& args);

}  // namespace epd::cli
