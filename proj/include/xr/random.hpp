#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace xr {

/// Seeded random source shared by every sampler. One instance per chain; not thread-safe.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform() { return unif_(engine_); }

    /// Uniform on the open interval (0, 1), safe for log().
    double uniform_open() {
        double u;
        do { u = unif_(engine_); } while (u <= 0.0);
        return u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() { return normal_(engine_); }
    double normal(double mean, double sd) { return mean + sd * normal_(engine_); }

    /// Gamma(shape, scale = 1).
    double gamma(double shape) {
        std::gamma_distribution<double> dist(shape, 1.0);
        return dist(engine_);
    }

    double exponential() { return -std::log(uniform_open()); }

    /// Draw from InverseGamma(shape, scale) with density proportional to x^(-shape-1) exp(-scale/x).
    double inverse_gamma(double shape, double scale) { return scale / gamma(shape); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        std::uniform_int_distribution<std::size_t> dist(0, n - 1);
        return dist(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// splitmix64 finalizer; used to derive sub-seeds and stable hashes.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace xr
