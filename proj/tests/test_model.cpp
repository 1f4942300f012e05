#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nhmm/model.hpp"

using namespace nhmm;

namespace {

// Two-state transition block with configurable alpha/beta, scalar covariate,
// centers at 0.
TransitionParams two_state(double a1, double a2, double b1, double b2) {
  TransitionParams tr;
  tr.K_rep = 2;
  tr.alpha = {{a1, a2}, {a1, a2}, {a1, a2}};
  tr.beta = {b1, b2};
  tr.x_star = {{0.0}, {0.0}};
  return tr;
}

}  // namespace

TEST_CASE("kernel_h values") {
  CHECK(kernel_h({1.5, -2.0}, {1.5, -2.0}) == 0.0);
  CHECK(kernel_h({0.0}, {1.0}) == -1.0);
  CHECK(kernel_h({1.0, 2.0}, {3.0, 4.0}) == -8.0);
  CHECK(kernel_h({1.0}, {4.0}) == kernel_h({4.0}, {1.0}));
  CHECK(kernel_h({2.0}, {-1.0}) <= 0.0);
  CHECK_THROWS_AS(kernel_h({1.0, 2.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("stick_weight closed-form values") {
  // k=1, alpha=2, beta=0 at the center: Phi(2)
  auto tr = two_state(2.0, 0.0, 0.0, 0.0);
  CHECK(stick_weight(1, 1, {0.3}, tr) == doctest::Approx(0.97724986805182079).epsilon(1e-12));

  // k=2 with all-zero alphas and betas: (1 - 0.5) * 0.5 = 0.25
  tr = two_state(0.0, 0.0, 0.0, 0.0);
  CHECK(stick_weight(1, 2, {0.7}, tr) == doctest::Approx(0.25).epsilon(1e-12));

  // at x = x_star the weight ignores beta entirely
  auto tr_a = two_state(1.0, -0.5, 0.0, 0.0);
  auto tr_b = two_state(1.0, -0.5, 3.0, 7.0);
  CHECK(stick_weight(1, 1, {0.0}, tr_a) ==
        doctest::Approx(stick_weight(1, 1, {0.0}, tr_b)).epsilon(1e-15));
  CHECK(stick_weight(1, 2, {0.0}, tr_a) ==
        doctest::Approx(stick_weight(1, 2, {0.0}, tr_b)).epsilon(1e-15));
}

TEST_CASE("stick_weight bounds and errors") {
  const auto tr = two_state(0.5, 1.0, 1.0, 2.0);
  double partial = 0.0;
  for (int k = 1; k <= 2; ++k) {
    const double w = stick_weight(0, k, {1.2}, tr);
    CHECK(w >= 0.0);
    CHECK(w <= 1.0);
    partial += w;
  }
  CHECK(partial <= 1.0);
  CHECK_THROWS_AS(stick_weight(1, 3, {0.0}, tr), std::out_of_range);
}

TEST_CASE("stick_weight monotone in alpha, non-increasing in distance") {
  double prev = 0.0;
  for (double a = -3.0; a <= 3.0; a += 0.25) {
    const auto tr = two_state(a, 0.0, 1.0, 1.0);
    const double w = stick_weight(1, 1, {0.5}, tr);
    if (a > -3.0) CHECK(w > prev);
    prev = w;
  }
  const auto tr = two_state(1.0, 0.0, 2.0, 2.0);
  double prev_w = 1.0;
  for (double d = 0.0; d <= 3.0; d += 0.1) {
    const double w = stick_weight(1, 1, {d}, tr);
    CHECK(w <= prev_w + 1e-15);
    prev_w = w;
  }
}

TEST_CASE("stick weights approach total mass one") {
  // alpha == 2, beta == 0: partial sum at K=200 is 1 within 1e-6
  TransitionParams tr;
  tr.K_rep = 200;
  tr.alpha.assign(201, Vec(200, 2.0));
  tr.beta.assign(200, 0.0);
  tr.x_star.assign(200, Vec{0.0});
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) sum += stick_weight(1, k, {0.0}, tr);
  CHECK(sum >= 1.0 - 1e-6);
  CHECK(sum <= 1.0 + 1e-12);
}

TEST_CASE("stick_weights_truncated") {
  auto tr = two_state(0.0, 0.0, 0.0, 0.0);
  SUBCASE("K=1 is the unit vector") {
    const Vec v = stick_weights_truncated(1, {0.4}, tr, 1);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == 1.0);
  }
  SUBCASE("zero alphas renormalize (0.5, 0.25) to (2/3, 1/3)") {
    const Vec v = stick_weights_truncated(0, {0.4}, tr, 2);
    REQUIRE(v.size() == 2);
    CHECK(v[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(v[0] + v[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("K=0 rejected") {
    CHECK_THROWS_AS(stick_weights_truncated(1, {0.0}, tr, 0), std::invalid_argument);
  }
  SUBCASE("underflow falls back to uniform and counts") {
    // alpha so negative every Phi underflows to 0
    auto far = two_state(-40.0, -40.0, 0.0, 0.0);
    long n_underflow = 0;
    const Vec v = stick_weights_truncated(1, {0.0}, far, 2, &n_underflow);
    CHECK(v[0] == doctest::Approx(0.5));
    CHECK(v[1] == doctest::Approx(0.5));
    CHECK(n_underflow == 1);
  }
}

TEST_CASE("probit_matrix consistent with stick_weight") {
  const auto tr = two_state(0.7, -0.3, 1.5, 0.8);
  const Vec x{0.9};
  const Mat pm = probit_matrix(x, tr);
  REQUIRE(pm.size() == 3);  // rows 0..K_rep
  for (int j = 0; j <= 2; ++j) {
    const Vec row = stick_row_from_probit(pm, j, 2);
    const Vec direct = stick_weights_truncated(j, x, tr, 2);
    CHECK(row[0] == doctest::Approx(direct[0]).epsilon(1e-14));
    CHECK(row[1] == doctest::Approx(direct[1]).epsilon(1e-14));
  }
}

TEST_CASE("slice sequence active set") {
  SliceSequence xi;  // kappa = 0.5
  CHECK(xi.xi(1) == 0.5);
  CHECK(xi.active_max(0.3) == 1);    // {1}: 0.5 > 0.3 >= 0.25
  CHECK(xi.active_max(0.001) == 9);  // 0.5^9 ~ 0.00195 > 0.001 >= 0.5^10
  CHECK(xi.active_max(std::nextafter(0.5, 0.0)) == 1);
  CHECK(xi.cover_size(0.01) == 7);  // 0.5^6 ~ 0.0156 > 0.01 >= 0.5^7
  CHECK_THROWS(xi.active_max(0.0));
  CHECK_THROWS(xi.active_max(1.0));
}

TEST_CASE("extend and shrink representation") {
  Hyperpriors hyper;
  hyper.x_star_grid = {{-1.0, 0.0, 1.0}};
  Rng rng(17);
  TransitionParams tr = two_state(0.0, 0.0, 1.0, 1.0);
  EmissionParams emit;
  emit.mu_y = {0.0, 1.0};
  emit.sigma2_y = {1.0, 1.0};

  CHECK_THROWS_AS(extend_representation(tr, emit, 2, hyper, 1, false, rng),
                  std::invalid_argument);
  extend_representation(tr, emit, 5, hyper, 1, false, rng);
  CHECK(tr.K_rep == 5);
  CHECK(tr.alpha.size() == 6);
  CHECK(tr.alpha.front().size() == 5);
  CHECK(emit.mu_y.size() == 5);
  for (int k = 2; k < 5; ++k) CHECK(tr.beta[k] > 0.0);
  tr.validate();

  shrink_representation(tr, emit, 3);
  CHECK(tr.K_rep == 3);
  CHECK(tr.alpha.size() == 4);
  CHECK(emit.mu_y.size() == 3);
  tr.validate();
}

TEST_CASE("extended alpha entries have the prior mean") {
  Hyperpriors hyper;  // mu_alpha = 2
  hyper.x_star_grid = {{0.0}};
  Rng rng(23);
  double sum = 0.0;
  long n = 0;
  for (int rep = 0; rep < 12500; ++rep) {
    TransitionParams tr = two_state(0.0, 0.0, 1.0, 1.0);
    EmissionParams emit;
    emit.mu_y = {0.0, 0.0};
    emit.sigma2_y = {1.0, 1.0};
    extend_representation(tr, emit, 4, hyper, 1, false, rng);
    for (std::size_t j = 0; j < tr.alpha.size(); ++j)
      for (int k = 2; k < 4; ++k) {
        sum += tr.alpha[j][k];
        ++n;
      }
  }
  const double se = hyper.sigma_alpha / std::sqrt(static_cast<double>(n));
  CHECK(std::fabs(sum / n - hyper.mu_alpha) < 3.0 * se);
}

TEST_CASE("homogeneous extension pins beta at zero") {
  Hyperpriors hyper;
  hyper.x_star_grid = {{0.0}};
  Rng rng(3);
  TransitionParams tr = two_state(0.0, 0.0, 0.0, 0.0);
  EmissionParams emit;
  emit.mu_y = {0.0, 0.0};
  emit.sigma2_y = {1.0, 1.0};
  extend_representation(tr, emit, 6, hyper, 1, true, rng);
  for (double b : tr.beta) CHECK(b == 0.0);
}

TEST_CASE("percentile: type-7 linear interpolation") {
  Vec v{0.1, 0.3};
  CHECK(percentile(v, 50.0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(percentile(v, 25.0) == doctest::Approx(0.15).epsilon(1e-15));
  Vec w{1.0, 2.0, 3.0, 4.0, 5.0};
  CHECK(percentile(w, 0.0) == 1.0);
  CHECK(percentile(w, 100.0) == 5.0);
  CHECK(percentile(w, 50.0) == 3.0);
  CHECK(percentile(w, 75.0) == 4.0);
}

TEST_CASE("default x_star grid covers the spread of x") {
  Rng rng(8);
  Mat x(500, Vec(1));
  for (auto& r : x) r[0] = rng.normal();
  const Mat grid = default_x_star_grid(x);
  REQUIRE(grid.size() == 1);
  CHECK(grid[0].size() >= 10);
  CHECK(std::is_sorted(grid[0].begin(), grid[0].end()));
  CHECK(grid[0].front() < -1.5);
  CHECK(grid[0].back() > 1.5);
}

TEST_CASE("standardize helpers") {
  Vec y{1.0, 2.0, 3.0, 4.0};
  double m = 0.0, s = 0.0;
  standardize_series(y, m, s);
  CHECK(m == doctest::Approx(2.5));
  double mean = 0.0;
  for (double v : y) mean += v;
  CHECK(std::fabs(mean) < 1e-12);
  double var = 0.0;
  for (double v : y) var += v * v;
  CHECK(var / 3.0 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("chain state validator catches broken invariants") {
  ChainState st;
  st.trans = two_state(0.0, 0.0, 1.0, 1.0);
  st.emit.mu_y = {0.0, 1.0};
  st.emit.sigma2_y = {1.0, 1.0};
  st.z = {1, 2};
  st.u = {0.4, 0.2};
  st.w = {{0.3}, {-0.2, 0.5}};
  SliceSequence xi;
  st.validate(xi);

  SUBCASE("u outside its slice support") {
    st.u[1] = 0.4;  // xi_2 = 0.25 < 0.4
    CHECK_THROWS(st.validate(xi));
  }
  SUBCASE("wrong w sign pattern") {
    st.w[1] = {0.2, 0.5};  // level 1 must be <= 0 when z_t = 2
    CHECK_THROWS(st.validate(xi));
  }
  SUBCASE("z out of representation") {
    st.z[0] = 3;
    CHECK_THROWS(st.validate(xi));
  }
}
