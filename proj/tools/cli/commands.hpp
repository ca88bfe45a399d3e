#pragma once

#include <iosfwd>

namespace dnnchip::cli {

// Full command-line entry point. Data goes to `out`, diagnostics to `err`.
// Returns the process exit code: 0 ok, 1 parse/usage, 2 validation,
// 3 simulation, 4 I/O.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dnnchip::cli
