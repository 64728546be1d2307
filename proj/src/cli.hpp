#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sparseland::cli {

struct RunOptions {
    bool honor_seed_env = true;  // false when replaying a manifest
};

/// Runs one command line (without the program name). Returns the exit code:
/// 0 verified/converged, 1 falsified/diverged, 2 usage or input error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, RunOptions opt = {});

}  // namespace sparseland::cli
