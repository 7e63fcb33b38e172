#pragma once

#include "xr/random.hpp"

namespace xr {

/// Draw from N(0, 1) truncated to [lower, +inf).
///
/// Below the switch point the plain normal rejection sampler is used (acceptance >= ~0.33);
/// above it, exponential-proposal rejection with the optimal rate (Robert 1995), whose
/// acceptance probability stays above 0.5 for every finite cut, so no draw can stall.
double standard_normal_above(Rng& rng, double lower);

/// Draw from N(mean, 1) truncated to (0, inf) when positive is true, else to (-inf, 0].
double truncated_normal_by_sign(Rng& rng, double mean, bool positive);

}  // namespace xr
