#pragma once

#include <ostream>

namespace coachmarl {

/// Entry point behind the `coachmarl` binary: train | eval | render | sweep.
/// Returns 0 on success, 1 on a runtime error, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace coachmarl
