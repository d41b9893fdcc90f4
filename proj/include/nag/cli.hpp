#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nag::cli {

// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error
// (including a failed gradient check).
int run(int argc, char** argv);

// Same as above without the program name; output goes to the given streams.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nag::cli
