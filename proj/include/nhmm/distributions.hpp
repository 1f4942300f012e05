#pragma once

#include <cstddef>
#include <vector>

#include "nhmm/rng.hpp"

namespace nhmm {

double normal_pdf(double x);
double normal_log_pdf(double x);
// Standard normal CDF, accurate to ~1e-15 over the whole real line.
double normal_cdf(double x);
// Upper tail 1 - Phi(x), without cancellation for large x.
double normal_sf(double x);
// Inverse of normal_cdf, refined to full double precision.
double normal_quantile(double p);

// Which half line a one-sided truncated normal lives on.
enum class TruncSide {
  BelowZero,  // support (-inf, 0]
  AboveZero,  // support (0, inf)
};

// Draw from N(mu, sigma^2) restricted to one side of zero. Inverse-CDF in the
// bulk, exponential rejection (Robert) once the truncation point is more than
// 5 sigma into the tail.
double sample_trunc_normal(double mu, double sigma, TruncSide side, Rng& rng);

// Mean of N(mu, sigma^2) truncated to the given side; used by tests and the
// Geweke harness.
double trunc_normal_mean(double mu, double sigma, TruncSide side);

// Inverse-Gamma(shape, scale) with mean scale/(shape-1) for shape > 1.
double sample_inverse_gamma(double shape, double scale, Rng& rng);

// Normal-Inverse-Gamma(mu0, sigma^2/nu0, gamma0, s0sq):
//   sigma^2 ~ InvGamma(gamma0, s0sq),  mu | sigma^2 ~ N(mu0, sigma^2/nu0).
struct NIGParams {
  double mu0 = 0.0;
  double nu0 = 1.0;
  double gamma0 = 2.0;
  double s0sq = 1.0;
};

// Exact conjugate update for a Normal mean/variance. Empty obs returns the
// prior unchanged.
NIGParams nig_posterior(const NIGParams& prior, const std::vector<double>& obs);

// Joint draw (mu, sigma2) from a NIG distribution.
struct NormalVariance {
  double mu;
  double sigma2;
};
NormalVariance sample_nig(const NIGParams& p, Rng& rng);

// Solve InvGamma (shape, scale) from a target prior mean and sd of sigma^2.
// Requires sd > 0; yields shape > 2.
void inverse_gamma_from_moments(double mean, double sd, double& shape, double& scale);

}  // namespace nhmm
