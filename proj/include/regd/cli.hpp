#pragma once

namespace regd {

// Command-line entry point, callable in-process by tests. Exit codes:
//   0 success, 1 usage error, 2 data error, 3 verification failure.
int cli_main(int argc, const char* const* argv);

}  // namespace regd
