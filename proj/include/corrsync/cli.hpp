#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace corrsync {

inline constexpr const char* kVersion = "0.1.0";

// Command-line entry point. args[0] is the program name. Returns 0 on
// success, 1 on a domain error and 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args);

}  // namespace corrsync
