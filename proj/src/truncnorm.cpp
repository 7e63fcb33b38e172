#include "xr/truncnorm.hpp"

#include <cmath>

namespace xr {

namespace {
constexpr double kRejectionSwitch = 0.45;
}

double standard_normal_above(Rng& rng, double lower) {
    if (lower < kRejectionSwitch) {
        for (;;) {
            const double z = rng.normal();
            if (z >= lower) return z;
        }
    }
    const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
    for (;;) {
        const double z = lower + rng.exponential() / rate;
        const double d = z - rate;
        if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
    }
}

double truncated_normal_by_sign(Rng& rng, double mean, bool positive) {
    if (positive) {
        // z = mean + e, e >= -mean; keep strictly positive.
        double z;
        do { z = mean + standard_normal_above(rng, -mean); } while (!(z > 0.0));
        return z;
    }
    // z <= 0  <=>  -z >= 0, with -z ~ N(-mean, 1).
    return -(-mean + standard_normal_above(rng, mean));
}

}  // namespace xr
