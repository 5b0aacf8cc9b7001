#pragma once

#include <ostream>
#include <span>
#include <string>

namespace dualreward::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;  // usage or I/O
inline constexpr int kExitData = 2;   // data validation
inline constexpr int kExitNumerical = 3;

// Entry point shared by the executable and the tests. `args` excludes the
// program name. Commands: gen-data, train, eval, infer, ablate.
int run(std::span<const std::string> args, std::ostream& out,
        std::ostream& err);

}  // namespace dualreward::cli
