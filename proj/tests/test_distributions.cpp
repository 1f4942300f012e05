#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nhmm/distributions.hpp"

using namespace nhmm;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("normal_cdf basic values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(2.0) == doctest::Approx(0.97724986805182079).epsilon(1e-13));
  CHECK(normal_cdf(-2.0) == doctest::Approx(1.0 - normal_cdf(2.0)).epsilon(1e-13));
}

TEST_CASE("normal_cdf matches erfc oracle to 1e-12 on [-8,8]") {
  for (double x = -8.0; x <= 8.0; x += 1.0 / 64.0) {
    const double oracle = 0.5 * std::erfc(-x / std::sqrt(2.0));
    CHECK(std::fabs(normal_cdf(x) - oracle) < 1e-12);
    // reflection symmetry
    CHECK(std::fabs(normal_cdf(-x) - (1.0 - normal_cdf(x))) < 1e-12);
  }
}

TEST_CASE("normal_sf avoids cancellation in the far tail") {
  CHECK(normal_sf(8.0) == doctest::Approx(6.22096057427178e-16).epsilon(1e-10));
  CHECK(normal_sf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("normal_quantile inverts normal_cdf") {
  // upper tail beyond ~6 sigma is excluded: Phi(x) is not representable
  // away from 1.0 there, so no inverse can recover x from the double p
  for (double x = -7.5; x <= 5.75; x += 0.25)
    CHECK(normal_quantile(normal_cdf(x)) == doctest::Approx(x).epsilon(1e-10));
  // the deep lower tail stays accurate because small p has full precision
  CHECK(normal_quantile(normal_cdf(-8.0)) == doctest::Approx(-8.0).epsilon(1e-10));
}

TEST_CASE("trunc normal: half-normal moments") {
  Rng rng(42);
  const int n = 1000000;
  double pos = 0.0, neg = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = sample_trunc_normal(0.0, 1.0, TruncSide::AboveZero, rng);
    const double b = sample_trunc_normal(0.0, 1.0, TruncSide::BelowZero, rng);
    CHECK(a > 0.0);
    CHECK(b <= 0.0);
    pos += a;
    neg += b;
  }
  const double half_normal_mean = std::sqrt(2.0 / kPi);  // ~0.7979
  CHECK(pos / n == doctest::Approx(half_normal_mean).epsilon(0.005 / half_normal_mean));
  CHECK(neg / n == doctest::Approx(-half_normal_mean).epsilon(0.005 / half_normal_mean));
}

TEST_CASE("trunc normal: negligible truncation at mu=10") {
  Rng rng(7);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = sample_trunc_normal(10.0, 1.0, TruncSide::AboveZero, rng);
    CHECK(v > 0.0);
    sum += v;
  }
  CHECK(sum / n == doctest::Approx(10.0).epsilon(0.01 / 10.0));
}

TEST_CASE("trunc normal mean matches analytic across mu grid (3 MC SEs)") {
  // analytic: mu + sigma*phi(a)/(1-Phi(a)), a = -mu/sigma, for the positive side
  Rng rng(99);
  const int n = 400000;
  for (double mu : {-8.0, -2.0, 0.0, 2.0, 8.0}) {
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = sample_trunc_normal(mu, 1.0, TruncSide::AboveZero, rng);
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(sumsq / n - mean * mean, 0.0));
    const double se = sd / std::sqrt(static_cast<double>(n));
    const double analytic = trunc_normal_mean(mu, 1.0, TruncSide::AboveZero);
    CHECK(std::fabs(mean - analytic) < 3.0 * se + 1e-12);
  }
  // mirrored side
  for (double mu : {-8.0, 0.0, 2.0}) {
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = sample_trunc_normal(mu, 1.0, TruncSide::BelowZero, rng);
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(sumsq / n - mean * mean, 0.0));
    const double se = sd / std::sqrt(static_cast<double>(n));
    const double analytic = trunc_normal_mean(mu, 1.0, TruncSide::BelowZero);
    CHECK(std::fabs(mean - analytic) < 3.0 * se + 1e-12);
  }
}

TEST_CASE("trunc normal rejects non-finite location") {
  Rng rng(1);
  CHECK_THROWS_AS(
      sample_trunc_normal(std::numeric_limits<double>::quiet_NaN(), 1.0,
                          TruncSide::AboveZero, rng),
      std::invalid_argument);
}

TEST_CASE("inverse gamma mean") {
  Rng rng(5);
  const int n = 1000000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = sample_inverse_gamma(3.0, 2.0, rng);
    CHECK(v > 0.0);
    sum += v;
  }
  CHECK(sum / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("inverse gamma from moments: mean 0.2, sd 1") {
  double shape = 0.0, scale = 0.0;
  inverse_gamma_from_moments(0.2, 1.0, shape, scale);
  CHECK(shape == doctest::Approx(2.04).epsilon(1e-12));
  CHECK(scale == doctest::Approx(0.208).epsilon(1e-12));
  // round-trip: implied mean and sd of sigma^2
  const double mean = scale / (shape - 1.0);
  const double var = scale * scale / ((shape - 1.0) * (shape - 1.0) * (shape - 2.0));
  CHECK(mean == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("nig_posterior: empty obs returns prior") {
  const NIGParams prior{1.5, 0.7, 3.0, 2.5};
  const NIGParams post = nig_posterior(prior, {});
  CHECK(post.mu0 == prior.mu0);
  CHECK(post.nu0 == prior.nu0);
  CHECK(post.gamma0 == prior.gamma0);
  CHECK(post.s0sq == prior.s0sq);
}

TEST_CASE("nig_posterior: symmetric data at prior mean keeps mu0 = 0") {
  const NIGParams post = nig_posterior({0.0, 1.0, 2.0, 1.0}, {0.0, 0.0});
  CHECK(post.mu0 == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(post.nu0 == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("nig_posterior: single observation shrinkage weight") {
  const double y = 3.7;
  const NIGParams post = nig_posterior({0.0, 0.1, 2.0, 1.0}, {y});
  CHECK(post.mu0 == doctest::Approx(y / 1.1).epsilon(1e-14));
}

TEST_CASE("nig_posterior: single observation matches quadrature oracle") {
  // E[mu | y] under the NIG model via 2D numerical integration of
  // p(mu, s2 | y) ∝ IG(s2; g0, s0) N(mu; mu0, s2/nu0) N(y; mu, s2)
  const NIGParams prior{0.4, 0.7, 3.0, 1.2};
  const double y = 1.9;
  auto unnorm = [&](double mu, double s2) {
    const double ig = std::pow(s2, -prior.gamma0 - 1.0) * std::exp(-prior.s0sq / s2);
    const double pmu = std::exp(-0.5 * prior.nu0 * (mu - prior.mu0) * (mu - prior.mu0) / s2) /
                       std::sqrt(s2);
    const double lik = std::exp(-0.5 * (y - mu) * (y - mu) / s2) / std::sqrt(s2);
    return ig * pmu * lik;
  };
  double z = 0.0, zmu = 0.0;
  const double dmu = 0.002, ds2 = 0.002;
  for (double mu = -8.0; mu <= 10.0; mu += dmu)
    for (double s2 = ds2; s2 <= 20.0; s2 += ds2) {
      const double w = unnorm(mu, s2);
      z += w;
      zmu += w * mu;
    }
  const NIGParams post = nig_posterior(prior, {y});
  CHECK(post.mu0 == doctest::Approx(zmu / z).epsilon(2e-3));
}

TEST_CASE("nig_posterior is order-exchangeable and composable") {
  const NIGParams prior{0.3, 0.5, 2.5, 1.5};
  const std::vector<double> a{1.0, -0.5, 2.2};
  const std::vector<double> b{0.7, 0.1};
  std::vector<double> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  std::vector<double> ba = b;
  ba.insert(ba.end(), a.begin(), a.end());

  const NIGParams p1 = nig_posterior(nig_posterior(prior, a), b);
  const NIGParams p2 = nig_posterior(prior, ab);
  const NIGParams p3 = nig_posterior(prior, ba);
  CHECK(p1.mu0 == doctest::Approx(p2.mu0).epsilon(1e-12));
  CHECK(p1.nu0 == doctest::Approx(p2.nu0).epsilon(1e-12));
  CHECK(p1.gamma0 == doctest::Approx(p2.gamma0).epsilon(1e-12));
  CHECK(p1.s0sq == doctest::Approx(p2.s0sq).epsilon(1e-12));
  CHECK(p3.mu0 == doctest::Approx(p2.mu0).epsilon(1e-12));
  CHECK(p3.s0sq == doctest::Approx(p2.s0sq).epsilon(1e-12));
}

TEST_CASE("sample_nig concentrates on heavy data") {
  Rng rng(11);
  std::vector<double> obs(1000, 2.0);
  const NIGParams post = nig_posterior({0.0, 0.1, 2.04, 0.208}, obs);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += sample_nig(post, rng).mu;
  CHECK(std::fabs(sum / n - 2.0) < 0.05);
}
