#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gtsynth::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs one command. `args` excludes the program name. Returns 0 on
/// success, 1 when the input fails validation or a computation is
/// rejected, 2 on a usage error (in which case nothing is written).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace gtsynth::cli
