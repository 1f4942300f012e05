#include "nhmm/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nhmm {

TrueDesign TrueDesign::design1(int T) {
  TrueDesign d;
  d.variant = DesignVariant::Design1;
  d.T = T;
  return d;
}

TrueDesign TrueDesign::design2(int T) {
  TrueDesign d;
  d.variant = DesignVariant::Design2;
  d.n_states = 3;
  d.x_star_percentiles = {50, 10, 90};
  d.T = T;
  return d;
}

void TrueDesign::validate() const {
  if (n_states < 2) throw std::invalid_argument("TrueDesign: need n_states >= 2");
  if (!(beta_true > 0.0)) throw std::invalid_argument("TrueDesign: beta_true must be > 0");
  if (T < 10) throw std::invalid_argument("TrueDesign: need T >= 10");
  if (static_cast<int>(x_star_percentiles.size()) != n_states)
    throw std::invalid_argument("TrueDesign: one x_star percentile per state");
  if (variant == DesignVariant::Design1) {
    if (static_cast<int>(mu_y.size()) != n_states || static_cast<int>(sigma_y.size()) != n_states)
      throw std::invalid_argument("TrueDesign: emission truth length mismatch");
  } else if (static_cast<int>(eta.size()) != n_states) {
    throw std::invalid_argument("TrueDesign: eta truth length mismatch");
  }
}

namespace {

Vec ar1_raw(int T_total, double rho, Rng& rng) {
  if (T_total < 2) throw std::invalid_argument("gen_ar1_predictor: need T >= 2");
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("gen_ar1_predictor: need |rho| < 1");
  Vec x(T_total);
  x[0] = rng.normal() / std::sqrt(1.0 - rho * rho);
  for (int t = 1; t < T_total; ++t) x[t] = rho * x[t - 1] + rng.normal();
  return x;
}

}  // namespace

Vec gen_ar1_predictor(int T_total, double rho, Rng& rng) {
  Vec x = ar1_raw(T_total, rho, rng);
  double mean, sd;
  standardize_series(x, mean, sd);
  return x;
}

SimulatedReplicate simulate_nhmm(const TrueDesign& design, Rng& rng) {
  design.validate();
  const int T = design.T;
  const int T_total = T + design.n_ahead;
  const int K = design.n_states;

  // standardize with fit-portion statistics so held-out points leak nothing
  Vec raw = ar1_raw(T_total, design.ar_rho, rng);
  Vec fit_part(raw.begin(), raw.begin() + T);
  double x_mean, x_sd;
  standardize_series(fit_part, x_mean, x_sd);
  Vec x_std(T_total);
  for (int t = 0; t < T_total; ++t) x_std[t] = (raw[t] - x_mean) / x_sd;

  SimulatedReplicate rep;
  rep.design = design;

  TransitionParams& tr = rep.true_trans;
  tr.K_rep = K;
  tr.alpha.assign(K + 1, Vec(K, design.alpha_offdiag));
  for (int j = 1; j <= K; ++j) tr.alpha[j][j - 1] = design.alpha_diag;
  tr.beta.assign(K, design.beta_true);
  tr.x_star.resize(K);
  for (int k = 0; k < K; ++k)
    tr.x_star[k] = {percentile(fit_part, design.x_star_percentiles[k])};

  EmissionParams& em = rep.true_emit;
  if (design.variant == DesignVariant::Design1) {
    em.variant = ModelVariant::iNHMM1;
    em.mu_y = design.mu_y;
    em.sigma2_y.resize(K);
    for (int k = 0; k < K; ++k) em.sigma2_y[k] = design.sigma_y[k] * design.sigma_y[k];
  } else {
    em.variant = ModelVariant::iNHMM2;
    em.eta = design.eta;
    em.global_sigma = true;
    em.sigma2_global = design.sigma_y_global * design.sigma_y_global;
  }

  rep.z_true.resize(T_total);
  Vec y_raw(T_total);
  for (int t = 0; t < T_total; ++t) {
    const int j = (t == 0) ? 0 : rep.z_true[t - 1];
    const Vec xt = {x_std[t]};
    const Vec row = stick_weights_truncated(j, xt, tr, K);
    double target = rng.uniform();
    int pick = K;
    double acc = 0.0;
    for (int k = 1; k <= K; ++k) {
      acc += row[k - 1];
      if (target <= acc) {
        pick = k;
        break;
      }
    }
    rep.z_true[t] = pick;
    const double mean = em.mean(pick, xt);
    y_raw[t] = rng.normal(mean, std::sqrt(em.variance(pick)));
  }

  Dataset& d = rep.data;
  d.x.resize(T);
  for (int t = 0; t < T; ++t) d.x[t] = {x_std[t]};
  d.x_raw_mean = {x_mean};
  d.x_raw_sd = {x_sd};
  d.future_x.resize(design.n_ahead);
  for (int s = 0; s < design.n_ahead; ++s) d.future_x[s] = {x_std[T + s]};
  d.y.assign(y_raw.begin(), y_raw.begin() + T);
  rep.y_heldout.assign(y_raw.begin() + T, y_raw.end());
  if (design.variant == DesignVariant::Design2) {
    standardize_series(d.y, d.y_raw_mean, d.y_raw_sd);
  } else {
    d.y_raw_mean = 0.0;
    d.y_raw_sd = 1.0;
  }
  d.validate();
  rep.x_raw_series = raw;
  rep.y_raw_series = y_raw;
  return rep;
}

DensityGrid true_predictive_density(const SimulatedReplicate& rep, const DensityGrid& grid,
                                    int n_ahead) {
  const int T = rep.design.T;
  return predictive_density_single(rep.true_trans, rep.true_emit, rep.z_true[T - 1],
                                   rep.data.future_x, grid, n_ahead);
}

}  // namespace nhmm
