#pragma once

namespace hbvar::cli {

// Entry point for the hbvar command-line tool. Exit codes: 0 success,
// 2 validation error, 3 numerical failure, 4 convergence warning.
int run(int argc, char** argv);

}  // namespace hbvar::cli
