#include "nhmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nhmm {

void Dataset::validate() const {
  if (x.size() != y.size()) throw std::invalid_argument("Dataset: x and y lengths differ");
  if (y.size() < 2) throw std::invalid_argument("Dataset: need T >= 2");
  const std::size_t p = dim();
  for (const auto& xt : x) {
    if (xt.size() != p) throw std::invalid_argument("Dataset: ragged covariate rows");
  }
  for (const auto& xf : future_x) {
    if (xf.size() != p) throw std::invalid_argument("Dataset: future_x dimension mismatch");
  }
}

void standardize_columns(Mat& x, Vec& mean, Vec& sd) {
  if (x.empty()) return;
  const std::size_t T = x.size();
  const std::size_t p = x.front().size();
  mean.assign(p, 0.0);
  sd.assign(p, 0.0);
  for (const auto& xt : x)
    for (std::size_t c = 0; c < p; ++c) mean[c] += xt[c];
  for (std::size_t c = 0; c < p; ++c) mean[c] /= static_cast<double>(T);
  for (const auto& xt : x)
    for (std::size_t c = 0; c < p; ++c) sd[c] += (xt[c] - mean[c]) * (xt[c] - mean[c]);
  for (std::size_t c = 0; c < p; ++c) {
    sd[c] = std::sqrt(sd[c] / static_cast<double>(T - 1));
    if (sd[c] <= 0.0) sd[c] = 1.0;
  }
  for (auto& xt : x)
    for (std::size_t c = 0; c < p; ++c) xt[c] = (xt[c] - mean[c]) / sd[c];
}

void standardize_series(Vec& y, double& mean, double& sd) {
  const std::size_t T = y.size();
  mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(T);
  sd = 0.0;
  for (double v : y) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / static_cast<double>(T - 1));
  if (sd <= 0.0) sd = 1.0;
  for (double& v : y) v = (v - mean) / sd;
}

void TransitionParams::validate() const {
  if (K_rep < 1) throw std::invalid_argument("TransitionParams: K_rep must be >= 1");
  if (static_cast<int>(alpha.size()) < K_rep + 1)
    throw std::invalid_argument("TransitionParams: alpha needs K_rep + 1 rows");
  for (const auto& row : alpha) {
    if (static_cast<int>(row.size()) < K_rep)
      throw std::invalid_argument("TransitionParams: alpha row too short");
  }
  if (static_cast<int>(beta.size()) < K_rep || static_cast<int>(x_star.size()) < K_rep)
    throw std::invalid_argument("TransitionParams: beta/x_star too short");
  for (int k = 0; k < K_rep; ++k) {
    if (beta[k] < 0.0) throw std::invalid_argument("TransitionParams: beta must be >= 0");
  }
}

double EmissionParams::mean(int k, const Vec& x) const {
  const int i = k - 1;
  if (variant == ModelVariant::iNHMM1) return mu_y[i];
  double m = eta[i][0];
  for (std::size_t c = 0; c < x.size(); ++c) m += eta[i][c + 1] * x[c];
  return m;
}

double EmissionParams::variance(int k) const {
  if (variant == ModelVariant::iNHMM2 && global_sigma) return sigma2_global;
  return sigma2_y[k - 1];
}

double EmissionParams::log_density(int k, double y, const Vec& x) const {
  const double m = mean(k, x);
  const double v = variance(k);
  const double r = y - m;
  return -0.5 * std::log(2.0 * M_PI * v) - 0.5 * r * r / v;
}

void EmissionParams::validate() const {
  const int K = size();
  if (variant == ModelVariant::iNHMM1) {
    if (static_cast<int>(sigma2_y.size()) != K)
      throw std::invalid_argument("EmissionParams: mu_y/sigma2_y length mismatch");
  } else if (!global_sigma && static_cast<int>(sigma2_y.size()) != K) {
    throw std::invalid_argument("EmissionParams: per-state sigma2 length mismatch");
  }
  for (int k = 1; k <= K; ++k) {
    if (!(variance(k) > 0.0)) throw std::invalid_argument("EmissionParams: nonpositive variance");
  }
}

void Hyperpriors::validate(std::size_t p) const {
  if (!(sigma_alpha > 0.0 && sigma_beta > 0.0))
    throw std::invalid_argument("Hyperpriors: sigma_alpha/sigma_beta must be > 0");
  if (!(nig.nu0 > 0.0 && nig.gamma0 > 0.0 && nig.s0sq > 0.0))
    throw std::invalid_argument("Hyperpriors: invalid NIG prior");
  if (x_star_grid.size() != p)
    throw std::invalid_argument("Hyperpriors: x_star_grid needs one entry per component");
  for (const auto& g : x_star_grid) {
    if (g.empty()) throw std::invalid_argument("Hyperpriors: empty x_star grid component");
  }
}

double percentile(Vec v, double p) {
  if (v.empty()) throw std::invalid_argument("percentile: empty sample");
  std::sort(v.begin(), v.end());
  if (p <= 0.0) return v.front();
  if (p >= 100.0) return v.back();
  const double h = (p / 100.0) * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

Mat default_x_star_grid(const Mat& x) {
  static const double pct[] = {1, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95, 99};
  const std::size_t p = x.empty() ? 0 : x.front().size();
  Mat grid(p);
  for (std::size_t c = 0; c < p; ++c) {
    Vec col;
    col.reserve(x.size());
    for (const auto& xt : x) col.push_back(xt[c]);
    for (double q : pct) grid[c].push_back(percentile(col, q));
    std::sort(grid[c].begin(), grid[c].end());
    grid[c].erase(std::unique(grid[c].begin(), grid[c].end()), grid[c].end());
  }
  return grid;
}

int SliceSequence::active_max(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("SliceSequence: u must lie in (0,1)");
  int k = 0;
  while (xi(k + 1) > u) ++k;
  return k;
}

double kernel_h(const Vec& x, const Vec& x_star) {
  if (x.size() != x_star.size())
    throw std::invalid_argument("kernel_h: dimension mismatch");
  double s = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double d = x[c] - x_star[c];
    s += d * d;
  }
  return -s;
}

double stick_weight(int j, int k, const Vec& x, const TransitionParams& trans) {
  if (k < 1 || k > trans.K_rep)
    throw std::out_of_range("stick_weight: state index outside representation");
  if (j < 0 || j >= static_cast<int>(trans.alpha.size()))
    throw std::out_of_range("stick_weight: row not populated");
  double w = 1.0;
  for (int l = 1; l < k; ++l) {
    const double eta = trans.alpha[j][l - 1] + trans.beta[l - 1] * kernel_h(x, trans.x_star[l - 1]);
    w *= normal_sf(eta);
  }
  const double eta = trans.alpha[j][k - 1] + trans.beta[k - 1] * kernel_h(x, trans.x_star[k - 1]);
  return w * normal_cdf(eta);
}

Mat probit_matrix(const Vec& x, const TransitionParams& trans) {
  const int K = trans.K_rep;
  Vec h(K);
  for (int l = 0; l < K; ++l) h[l] = kernel_h(x, trans.x_star[l]);
  Mat probit(trans.alpha.size(), Vec(K));
  for (std::size_t j = 0; j < trans.alpha.size(); ++j) {
    for (int l = 0; l < K; ++l) {
      probit[j][l] = normal_cdf(trans.alpha[j][l] + trans.beta[l] * h[l]);
    }
  }
  return probit;
}

Vec stick_row_from_probit(const Mat& probit, int j, int K, long* underflow_count) {
  Vec w(K);
  double remain = 1.0;
  for (int k = 0; k < K; ++k) {
    w[k] = remain * probit[j][k];
    remain *= (1.0 - probit[j][k]);
  }
  double total = 0.0;
  for (double v : w) total += v;
  if (total <= 0.0) {
    if (underflow_count) ++(*underflow_count);
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(K));
    return w;
  }
  for (double& v : w) v /= total;
  return w;
}

Vec stick_weights_truncated(int j, const Vec& x, const TransitionParams& trans, int K,
                            long* underflow_count) {
  if (K < 1) throw std::invalid_argument("stick_weights_truncated: K must be >= 1");
  if (K > trans.K_rep)
    throw std::out_of_range("stick_weights_truncated: K exceeds representation");
  const Mat probit = probit_matrix(x, trans);
  return stick_row_from_probit(probit, j, K, underflow_count);
}

void extend_representation(TransitionParams& trans, EmissionParams& emit, int K_new,
                           const Hyperpriors& hyper, std::size_t p, bool homogeneous,
                           Rng& rng) {
  if (K_new <= trans.K_rep)
    throw std::invalid_argument("extend_representation: K_new must exceed K_rep");
  const int K_old = trans.K_rep;
  // widen existing rows, then add brand new rows for the new states
  trans.alpha.resize(K_new + 1);
  for (auto& row : trans.alpha) {
    while (static_cast<int>(row.size()) < K_new) row.push_back(rng.normal(hyper.mu_alpha, hyper.sigma_alpha));
  }
  for (int k = K_old; k < K_new; ++k) {
    trans.beta.push_back(homogeneous
                             ? 0.0
                             : sample_trunc_normal(hyper.mu_beta, hyper.sigma_beta,
                                                   TruncSide::AboveZero, rng));
    Vec xs(p);
    for (std::size_t c = 0; c < p; ++c) {
      const auto& g = hyper.x_star_grid[c];
      xs[c] = g[rng.uniform_index(static_cast<int>(g.size()))];
    }
    trans.x_star.push_back(std::move(xs));
    if (emit.variant == ModelVariant::iNHMM1) {
      NormalVariance nv = sample_nig(hyper.nig, rng);
      emit.mu_y.push_back(nv.mu);
      emit.sigma2_y.push_back(nv.sigma2);
    } else {
      Vec eta(p + 1);
      for (std::size_t c = 0; c <= p; ++c) {
        eta[c] = (c < hyper.eta0.size() ? hyper.eta0[c] : 0.0) + rng.normal();
      }
      emit.eta.push_back(std::move(eta));
      if (!emit.global_sigma) {
        emit.sigma2_y.push_back(sample_inverse_gamma(hyper.ig_shape, hyper.ig_scale, rng));
      }
    }
  }
  trans.K_rep = K_new;
}

void shrink_representation(TransitionParams& trans, EmissionParams& emit, int K_new) {
  if (K_new < 1 || K_new > trans.K_rep)
    throw std::invalid_argument("shrink_representation: bad K_new");
  trans.alpha.resize(K_new + 1);
  for (auto& row : trans.alpha) row.resize(K_new);
  trans.beta.resize(K_new);
  trans.x_star.resize(K_new);
  if (emit.variant == ModelVariant::iNHMM1) {
    emit.mu_y.resize(K_new);
    emit.sigma2_y.resize(K_new);
  } else {
    emit.eta.resize(K_new);
    if (!emit.global_sigma) emit.sigma2_y.resize(K_new);
  }
  trans.K_rep = K_new;
}

void ChainState::validate(const SliceSequence& xi) const {
  const std::size_t T = z.size();
  if (u.size() != T || w.size() != T)
    throw std::runtime_error("ChainState: z/u/w length mismatch");
  trans.validate();
  emit.validate();
  for (std::size_t t = 0; t < T; ++t) {
    if (z[t] < 1 || z[t] > trans.K_rep)
      throw std::runtime_error("ChainState: z outside representation");
    if (!(u[t] > 0.0 && u[t] < xi.xi(z[t])))
      throw std::runtime_error("ChainState: u outside (0, xi_{z_t})");
    if (static_cast<int>(w[t].size()) != z[t])
      throw std::runtime_error("ChainState: w row has wrong length");
    for (int l = 1; l <= z[t]; ++l) {
      const double wv = w[t][l - 1];
      if (l == z[t] ? !(wv > 0.0) : !(wv <= 0.0))
        throw std::runtime_error("ChainState: w sign pattern inconsistent with z");
    }
  }
}

}  // namespace nhmm
