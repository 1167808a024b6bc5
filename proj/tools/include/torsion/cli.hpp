#pragma once

#include <iosfwd>

namespace torsion {

/// Entry point of the torsion command line. Returns 0 on success, 1 on a
/// usage or input error and 2 on a numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace torsion
