#pragma once

#include <cstdint>
#include <iosfwd>

namespace cueing {

// Finite-difference verification of every differentiable primitive (20 random
// shapes each, relative tolerance 1e-4 with the per-op tolerances tightened as
// specified) plus the full tiny-config model at 1e-3, all in double precision.
// Prints one line per check; returns false if any check fails.
bool run_gradcheck_suite(uint64_t seed, std::ostream& os);

}  // namespace cueing
