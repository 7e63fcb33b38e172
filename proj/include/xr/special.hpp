#pragma once

#include <cstdint>
#include <string_view>

namespace xr {

// Standard normal helpers.
double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

double chi_square_cdf(double x, double dof);
double chi_square_quantile(double p, double dof);

/// FNV-1a over raw bytes; the stable hash used for fingerprints and unseen-level routing.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace xr

namespace xr {

/// lambda such that P(sigma < 1) = q under sigma^2 ~ InverseGamma(nu/2, nu lambda/2):
/// nu lambda is the chi-square(nu) quantile at 1 - q.
double calibrate_sigma_prior(double nu, double q);

}  // namespace xr
