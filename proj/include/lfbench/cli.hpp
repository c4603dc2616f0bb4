#pragma once

namespace lfb::cli {

// Entry point for the lfb tool. Exit codes: 0 success, 1 usage error,
// 2 data error, 3 numeric failure.
int run(int argc, const char* const* argv);

}  // namespace lfb::cli
