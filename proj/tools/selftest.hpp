#pragma once

#include <ostream>

namespace stvo_tools {

// A few seconds of invariant checks on the installed build. Prints one line
// per check; true when all pass.
bool run_selftest(std::ostream& os);

}  // namespace stvo_tools
