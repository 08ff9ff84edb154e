#pragma once
// Command-line driver: make-synthetic, train, eval, generate, interpolate,
// gradcheck. Returns the process exit code.

#include <iosfwd>

namespace hicmd::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hicmd::cli
