#include "nhmm/distributions.hpp"

#include <cmath>
#include <stdexcept>

namespace nhmm {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kLogSqrt2Pi = 0.9189385332046727418;
}  // namespace

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

// Acklam's rational approximation followed by one Newton step against the
// erfc-based CDF; the refinement brings the result to full double precision.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
  }
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Newton refinement; in the deep lower tail Phi(x) and p are both tiny but
  // their ratio to pdf(x) stays well conditioned.
  for (int i = 0; i < 2; ++i) {
    double err = normal_cdf(x) - p;
    double pdf = normal_pdf(x);
    if (pdf > 0.0) x -= err / pdf;
  }
  return x;
}

namespace {

// Standard normal conditioned on z >= a. a may be far in either tail.
double sample_std_lower_truncated(double a, Rng& rng) {
  if (a < 5.0) {
    // Map a uniform into the upper-tail mass below normal_sf(a).
    double q = normal_sf(a);
    double z = -normal_quantile(rng.uniform() * q);
    return z < a ? a : z;
  }
  // Robert's exponential rejection for deep tails.
  double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    double z = a + rng.exponential(lambda);
    double u = rng.uniform();
    double diff = z - lambda;
    if (u <= std::exp(-0.5 * diff * diff)) return z;
  }
}

}  // namespace

double sample_trunc_normal(double mu, double sigma, TruncSide side, Rng& rng) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sample_trunc_normal: sigma must be > 0");
  if (!std::isfinite(mu)) throw std::invalid_argument("sample_trunc_normal: mu must be finite");
  if (side == TruncSide::AboveZero) {
    double a = -mu / sigma;
    double z = sample_std_lower_truncated(a, rng);
    double x = mu + sigma * z;
    // inverse-CDF can land exactly on the boundary at the last ulp
    if (x <= 0.0) x = std::nextafter(0.0, 1.0);
    return x;
  }
  double a = mu / sigma;  // mirrored problem
  double z = sample_std_lower_truncated(a, rng);
  double x = -(-mu + sigma * z);
  if (x > 0.0) x = 0.0;
  return x;
}

double trunc_normal_mean(double mu, double sigma, TruncSide side) {
  if (side == TruncSide::AboveZero) {
    double a = -mu / sigma;
    // phi(a)/(1-Phi(a)) evaluated without cancellation
    double ratio = normal_pdf(a) / normal_sf(a);
    return mu + sigma * ratio;
  }
  double a = mu / sigma;
  double ratio = normal_pdf(a) / normal_sf(a);
  return -(-mu + sigma * ratio);
}

double sample_inverse_gamma(double shape, double scale, Rng& rng) {
  if (!(shape > 0.0 && scale > 0.0)) {
    throw std::invalid_argument("sample_inverse_gamma: shape and scale must be > 0");
  }
  double g = rng.gamma(shape, 1.0 / scale);
  return 1.0 / g;
}

NIGParams nig_posterior(const NIGParams& prior, const std::vector<double>& obs) {
  const std::size_t n = obs.size();
  if (n == 0) return prior;
  double sum = 0.0;
  for (double y : obs) sum += y;
  const double ybar = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double y : obs) ss += (y - ybar) * (y - ybar);

  NIGParams post;
  const double nn = static_cast<double>(n);
  post.nu0 = prior.nu0 + nn;
  post.mu0 = (prior.nu0 * prior.mu0 + nn * ybar) / post.nu0;
  post.gamma0 = prior.gamma0 + 0.5 * nn;
  post.s0sq = prior.s0sq + 0.5 * ss +
              0.5 * prior.nu0 * nn * (ybar - prior.mu0) * (ybar - prior.mu0) / post.nu0;
  return post;
}

NormalVariance sample_nig(const NIGParams& p, Rng& rng) {
  double sigma2 = sample_inverse_gamma(p.gamma0, p.s0sq, rng);
  double mu = p.mu0 + rng.normal() * std::sqrt(sigma2 / p.nu0);
  return {mu, sigma2};
}

void inverse_gamma_from_moments(double mean, double sd, double& shape, double& scale) {
  if (!(mean > 0.0 && sd > 0.0)) {
    throw std::invalid_argument("inverse_gamma_from_moments: mean and sd must be > 0");
  }
  // mean = scale/(shape-1), var = mean^2/(shape-2)
  shape = 2.0 + mean * mean / (sd * sd);
  scale = mean * (shape - 1.0);
}

}  // namespace nhmm
