#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rlid::cli {

// Runs one command line (args excludes the program name). Returns the exit
// code: 0 success, 1 usage, 2 data or file error, 3 numeric failure.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace rlid::cli
