#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace remtrack::cli {

/// Entry point of the `remtrack` executable. Returns the process exit code.
int run(int argc, char** argv);

/// Same, with explicit arguments (without the program name) and streams.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace remtrack::cli
