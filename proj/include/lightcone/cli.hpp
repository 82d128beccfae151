#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lightcone {

inline constexpr const char* kVersion = "1.0.0";

// Runs one command line (without the program name). Returns the process
// exit code: 0 success, 2 configuration error, 3 data error, 4 unsupported
// method.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lightcone
