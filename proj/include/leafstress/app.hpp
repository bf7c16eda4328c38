#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace leafstress {

/// Command-line entry point; `args` excludes the program name. Returns 0 on
/// success, 1 on validation errors (including usage errors) and 2 on I/O errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace leafstress
