#include "nhmm/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace nhmm {

void McmcConfig::validate() const {
  if (n_iter < 1) throw std::invalid_argument("McmcConfig: n_iter must be >= 1");
  if (n_burnin < 0 || n_burnin >= n_iter)
    throw std::invalid_argument("McmcConfig: need 0 <= n_burnin < n_iter");
  if (thin < 1) throw std::invalid_argument("McmcConfig: thin must be >= 1");
  if (dpmm_iters < 1) throw std::invalid_argument("McmcConfig: dpmm_iters must be >= 1");
}

int active_set_max(double u, const SliceSequence& xi) {
  const int m = xi.active_max(u);
  if (m < 1) throw std::runtime_error("active_set: empty active set, u >= xi_1");
  return m;
}

void update_slice(ChainState& state, const ModelSpec& spec, std::size_t p, Rng& rng) {
  const SliceSequence& xi = spec.slice;
  double u_min = 1.0;
  int z_max = 1;
  for (std::size_t t = 0; t < state.z.size(); ++t) {
    state.u[t] = rng.uniform() * xi.xi(state.z[t]);
    u_min = std::min(u_min, state.u[t]);
    z_max = std::max(z_max, state.z[t]);
  }
  const int K_target = std::max(z_max, xi.cover_size(u_min));
  if (K_target > state.trans.K_rep) {
    extend_representation(state.trans, state.emit, K_target, spec.hyper, p,
                          spec.homogeneous, rng);
  } else if (K_target < state.trans.K_rep) {
    shrink_representation(state.trans, state.emit, K_target);
  }
}

namespace {

// Unnormalized stick weights pi_k(j, x) for k = 1..K from one probit row.
void raw_stick_row(const Vec& probit_row, int K, Vec& out) {
  out.resize(K);
  double remain = 1.0;
  for (int k = 0; k < K; ++k) {
    out[k] = remain * probit_row[k];
    remain *= (1.0 - probit_row[k]);
  }
}

[[noreturn]] void throw_degenerate(std::size_t t, int active) {
  std::ostringstream os;
  os << "numerical degeneracy: all-zero message/weight row at t=" << t
     << " (active set 1.." << active << ")";
  throw std::runtime_error(os.str());
}

}  // namespace

Mat backward_messages(const ChainState& state, const Dataset& data,
                      const std::vector<Mat>& probit, const SliceSequence& xi) {
  const std::size_t T = data.size();
  const int K = state.trans.K_rep;
  Mat msg(T, Vec(K, 0.0));
  std::fill(msg[T - 1].begin(), msg[T - 1].end(), 1.0);
  Vec sticks, contrib(K);
  for (std::size_t t1 = T - 1; t1 >= 1; --t1) {
    const std::size_t t = t1 - 1;  // fill msg[t] from msg[t1]
    const int active = active_set_max(state.u[t1], xi);
    // per-successor factor beta_{t+1}(k') f(y_{t+1}|k') / xi_{k'}
    for (int kp = 1; kp <= active; ++kp) {
      contrib[kp - 1] = msg[t1][kp - 1] *
                        std::exp(state.emit.log_density(kp, data.y[t1], data.x[t1])) /
                        xi.xi(kp);
    }
    double row_max = 0.0;
    for (int k = 1; k <= K; ++k) {
      raw_stick_row(probit[t1][k], active, sticks);
      double s = 0.0;
      for (int kp = 0; kp < active; ++kp) s += sticks[kp] * contrib[kp];
      msg[t][k - 1] = s;
      row_max = std::max(row_max, s);
    }
    if (row_max <= 0.0) throw_degenerate(t1, active);
    for (double& v : msg[t]) v /= row_max;  // sampling is invariant to per-t scale
  }
  return msg;
}

std::vector<int> sample_latent_sequence(const ChainState& state, const Mat& messages,
                                        const Dataset& data, const std::vector<Mat>& probit,
                                        const SliceSequence& xi, Rng& rng) {
  const std::size_t T = data.size();
  std::vector<int> z(T);
  Vec sticks, w;
  for (std::size_t t = 0; t < T; ++t) {
    const int j = (t == 0) ? 0 : z[t - 1];
    const int active = active_set_max(state.u[t], xi);
    raw_stick_row(probit[t][j], active, sticks);
    w.resize(active);
    double total = 0.0;
    for (int k = 1; k <= active; ++k) {
      w[k - 1] = messages[t][k - 1] *
                 std::exp(state.emit.log_density(k, data.y[t], data.x[t])) *
                 sticks[k - 1] / xi.xi(k);
      total += w[k - 1];
    }
    if (total <= 0.0) throw_degenerate(t, active);
    double target = rng.uniform() * total;
    int pick = active;
    double acc = 0.0;
    for (int k = 1; k <= active; ++k) {
      acc += w[k - 1];
      if (target <= acc) {
        pick = k;
        break;
      }
    }
    z[t] = pick;
  }
  return z;
}

void update_auxiliary_w(ChainState& state, const Dataset& data, Rng& rng) {
  const std::size_t T = data.size();
  state.w.assign(T, Vec());
  for (std::size_t t = 0; t < T; ++t) {
    const int j = (t == 0) ? 0 : state.z[t - 1];
    state.w[t].resize(state.z[t]);
    for (int l = 1; l <= state.z[t]; ++l) {
      const double loc = state.trans.alpha[j][l - 1] +
                         state.trans.beta[l - 1] * kernel_h(data.x[t], state.trans.x_star[l - 1]);
      const TruncSide side = (l == state.z[t]) ? TruncSide::AboveZero : TruncSide::BelowZero;
      state.w[t][l - 1] = sample_trunc_normal(loc, 1.0, side, rng);
    }
  }
}

void update_alpha(ChainState& state, const Dataset& data, const Hyperpriors& hyper, Rng& rng) {
  const std::size_t T = data.size();
  const int K = state.trans.K_rep;
  // accumulate sufficient statistics per (row j, level l)
  Mat sum(K + 1, Vec(K, 0.0));
  std::vector<std::vector<int>> count(K + 1, std::vector<int>(K, 0));
  for (std::size_t t = 0; t < T; ++t) {
    const int j = (t == 0) ? 0 : state.z[t - 1];
    for (int l = 1; l <= state.z[t]; ++l) {
      const double h = kernel_h(data.x[t], state.trans.x_star[l - 1]);
      sum[j][l - 1] += state.w[t][l - 1] - state.trans.beta[l - 1] * h;
      count[j][l - 1] += 1;
    }
  }
  const double prior_prec = 1.0 / (hyper.sigma_alpha * hyper.sigma_alpha);
  for (int j = 0; j <= K; ++j) {
    for (int l = 1; l <= K; ++l) {
      const double prec = count[j][l - 1] + prior_prec;
      const double mean = (sum[j][l - 1] + hyper.mu_alpha * prior_prec) / prec;
      state.trans.alpha[j][l - 1] = rng.normal(mean, std::sqrt(1.0 / prec));
    }
  }
}

void update_beta(ChainState& state, const Dataset& data, const Hyperpriors& hyper, Rng& rng) {
  const std::size_t T = data.size();
  const int K = state.trans.K_rep;
  const double prior_prec = 1.0 / (hyper.sigma_beta * hyper.sigma_beta);
  for (int l = 1; l <= K; ++l) {
    double sum_h2 = 0.0, sum_hw = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      if (state.z[t] < l) continue;
      const int j = (t == 0) ? 0 : state.z[t - 1];
      const double h = kernel_h(data.x[t], state.trans.x_star[l - 1]);
      sum_h2 += h * h;
      sum_hw += h * (state.w[t][l - 1] - state.trans.alpha[j][l - 1]);
    }
    const double prec = prior_prec + sum_h2;
    const double mean = (prior_prec * hyper.mu_beta + sum_hw) / prec;
    state.trans.beta[l - 1] =
        sample_trunc_normal(mean, std::sqrt(1.0 / prec), TruncSide::AboveZero, rng);
  }
}

void update_x_star(ChainState& state, const Dataset& data, const Hyperpriors& hyper, Rng& rng) {
  const std::size_t T = data.size();
  const std::size_t p = data.dim();
  const int K = state.trans.K_rep;
  Vec logw;
  for (int l = 1; l <= K; ++l) {
    std::vector<std::size_t> members;
    for (std::size_t t = 0; t < T; ++t)
      if (state.z[t] >= l) members.push_back(t);
    Vec& xs = state.trans.x_star[l - 1];
    if (members.empty()) {
      for (std::size_t c = 0; c < p; ++c) {
        const auto& g = hyper.x_star_grid[c];
        xs[c] = g[rng.uniform_index(static_cast<int>(g.size()))];
      }
      continue;
    }
    const double beta_l = state.trans.beta[l - 1];
    // coordinate-wise scan over grid candidates; exact for p = 1 and a valid
    // Gibbs update componentwise for p > 1
    for (std::size_t c = 0; c < p; ++c) {
      const auto& grid = hyper.x_star_grid[c];
      logw.assign(grid.size(), 0.0);
      for (std::size_t t : members) {
        const int j = (t == 0) ? 0 : state.z[t - 1];
        double other = 0.0;
        for (std::size_t c2 = 0; c2 < p; ++c2) {
          if (c2 == c) continue;
          const double d = data.x[t][c2] - xs[c2];
          other += d * d;
        }
        const double base = state.w[t][l - 1] - state.trans.alpha[j][l - 1];
        for (std::size_t g = 0; g < grid.size(); ++g) {
          const double d = data.x[t][c] - grid[g];
          const double h = -(other + d * d);
          const double r = base - beta_l * h;
          logw[g] += -0.5 * r * r;
        }
      }
      const double mx = *std::max_element(logw.begin(), logw.end());
      double total = 0.0;
      for (double& v : logw) {
        v = std::exp(v - mx);
        total += v;
      }
      double target = rng.uniform() * total;
      std::size_t pick = grid.size() - 1;
      double acc = 0.0;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        acc += logw[g];
        if (target <= acc) {
          pick = g;
          break;
        }
      }
      xs[c] = grid[pick];
    }
  }
}

void update_emission_inhmm1(ChainState& state, const Dataset& data, const Hyperpriors& hyper,
                            Rng& rng) {
  const int K = state.trans.K_rep;
  std::vector<Vec> obs(K);
  for (std::size_t t = 0; t < data.size(); ++t) obs[state.z[t] - 1].push_back(data.y[t]);
  for (int k = 0; k < K; ++k) {
    const NIGParams post = nig_posterior(hyper.nig, obs[k]);
    const NormalVariance nv = sample_nig(post, rng);
    state.emit.mu_y[k] = nv.mu;
    state.emit.sigma2_y[k] = nv.sigma2;
  }
}

namespace {

// In-place Cholesky solve for small SPD systems (q = p + 1).
void cholesky(Mat& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
      if (i == j) {
        if (s <= 0.0) throw std::runtime_error("cholesky: matrix not positive definite");
        a[i][i] = std::sqrt(s);
      } else {
        a[i][j] = s / a[j][j];
      }
    }
  }
}

Vec chol_solve(const Mat& L, Vec b) {
  const std::size_t n = L.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= L[i][k] * b[k];
    b[i] /= L[i][i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) b[i] -= L[k][i] * b[k];
    b[i] /= L[i][i];
  }
  return b;
}

// Draw from N(mean, P^{-1}) given the Cholesky factor L of the precision P.
Vec mvn_from_precision(const Vec& mean, const Mat& L, Rng& rng) {
  const std::size_t n = mean.size();
  Vec zdraw(n), out(n);
  for (double& v : zdraw) v = rng.normal();
  // solve L^T out = z
  for (std::size_t i = n; i-- > 0;) {
    double s = zdraw[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= L[k][i] * out[k];
    out[i] = s / L[i][i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] += mean[i];
  return out;
}

}  // namespace

void update_emission_inhmm2(ChainState& state, const Dataset& data, const Hyperpriors& hyper,
                            bool per_state_sigma, Rng& rng) {
  const std::size_t p = data.dim();
  const std::size_t q = p + 1;
  const int K = state.trans.K_rep;
  std::vector<std::vector<std::size_t>> members(K);
  for (std::size_t t = 0; t < data.size(); ++t) members[state.z[t] - 1].push_back(t);

  for (int k = 0; k < K; ++k) {
    const double s2 = per_state_sigma ? state.emit.sigma2_y[k] : state.emit.sigma2_global;
    // precision = I + X'X / sigma^2, rhs = eta0 + X'y / sigma^2
    Mat prec(q, Vec(q, 0.0));
    Vec rhs(q, 0.0);
    for (std::size_t c = 0; c < q; ++c) {
      prec[c][c] = 1.0;
      rhs[c] = (c < hyper.eta0.size()) ? hyper.eta0[c] : 0.0;
    }
    Vec row(q);
    for (std::size_t t : members[k]) {
      row[0] = 1.0;
      for (std::size_t c = 0; c < p; ++c) row[c + 1] = data.x[t][c];
      for (std::size_t i = 0; i < q; ++i) {
        rhs[i] += row[i] * data.y[t] / s2;
        for (std::size_t j2 = 0; j2 <= i; ++j2) prec[i][j2] += row[i] * row[j2] / s2;
      }
    }
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j2 = i + 1; j2 < q; ++j2) prec[i][j2] = prec[j2][i];
    cholesky(prec);
    const Vec mean = chol_solve(prec, rhs);
    state.emit.eta[k] = mvn_from_precision(mean, prec, rng);
  }

  auto residual2 = [&](int k, std::size_t t) {
    double m = state.emit.eta[k][0];
    for (std::size_t c = 0; c < p; ++c) m += state.emit.eta[k][c + 1] * data.x[t][c];
    const double r = data.y[t] - m;
    return r * r;
  };
  if (per_state_sigma) {
    for (int k = 0; k < K; ++k) {
      double ss = 0.0;
      for (std::size_t t : members[k]) ss += residual2(k, t);
      state.emit.sigma2_y[k] = sample_inverse_gamma(
          hyper.ig_shape + 0.5 * static_cast<double>(members[k].size()),
          hyper.ig_scale + 0.5 * ss, rng);
    }
  } else {
    double ss = 0.0;
    for (std::size_t t = 0; t < data.size(); ++t) ss += residual2(state.z[t] - 1, t);
    state.emit.sigma2_global = sample_inverse_gamma(
        hyper.ig_shape + 0.5 * static_cast<double>(data.size()), hyper.ig_scale + 0.5 * ss, rng);
  }
}

void gibbs_sweep(ChainState& state, const Dataset& data, const ModelSpec& spec, Rng& rng,
                 long* underflow_count, PhaseTimings* timings) {
  (void)underflow_count;
  using clock = std::chrono::steady_clock;
  auto mark = clock::now();
  auto lap = [&](double PhaseTimings::* field) {
    if (!timings) return;
    const auto now = clock::now();
    timings->*field += std::chrono::duration<double>(now - mark).count();
    mark = now;
  };

  update_slice(state, spec, data.dim(), rng);
  lap(&PhaseTimings::slice);
  std::vector<Mat> probit(data.size());
  for (std::size_t t = 0; t < data.size(); ++t) probit[t] = probit_matrix(data.x[t], state.trans);
  const Mat messages = backward_messages(state, data, probit, spec.slice);
  lap(&PhaseTimings::messages);
  state.z = sample_latent_sequence(state, messages, data, probit, spec.slice, rng);
  lap(&PhaseTimings::latent);
  update_auxiliary_w(state, data, rng);
  lap(&PhaseTimings::w);
  update_alpha(state, data, spec.hyper, rng);
  lap(&PhaseTimings::alpha);
  if (!spec.homogeneous) update_beta(state, data, spec.hyper, rng);
  lap(&PhaseTimings::beta);
  update_x_star(state, data, spec.hyper, rng);
  lap(&PhaseTimings::x_star);
  if (spec.variant == ModelVariant::iNHMM1) {
    update_emission_inhmm1(state, data, spec.hyper, rng);
  } else {
    update_emission_inhmm2(state, data, spec.hyper, spec.per_state_sigma, rng);
  }
  lap(&PhaseTimings::emission);
}

namespace {

// Dirichlet process mixture fit to the emission model alone (time structure
// and covariate influence on the states ignored), Neal's algorithm 8.
struct DpmmResult {
  std::vector<int> labels;  // 0-based cluster ids, contiguous
  EmissionParams emit;      // per-cluster parameters
};

DpmmResult fit_dpmm(const Dataset& data, const ModelSpec& spec, int iters, Rng& rng) {
  const std::size_t T = data.size();
  const std::size_t p = data.dim();
  const double conc = 1.0;
  const int n_aux = 3;
  const ModelVariant variant = spec.variant;

  struct Cluster {
    double mu = 0.0, sigma2 = 1.0;
    Vec eta;
    int n = 0;
  };
  auto prior_draw = [&](Rng& r) {
    Cluster c;
    if (variant == ModelVariant::iNHMM1) {
      const NormalVariance nv = sample_nig(spec.hyper.nig, r);
      c.mu = nv.mu;
      c.sigma2 = nv.sigma2;
    } else {
      c.eta.resize(p + 1);
      for (std::size_t i = 0; i <= p; ++i)
        c.eta[i] = (i < spec.hyper.eta0.size() ? spec.hyper.eta0[i] : 0.0) + r.normal();
      c.sigma2 = sample_inverse_gamma(spec.hyper.ig_shape, spec.hyper.ig_scale, r);
    }
    return c;
  };
  auto log_f = [&](const Cluster& c, std::size_t t) {
    double m = c.mu;
    if (variant == ModelVariant::iNHMM2) {
      m = c.eta[0];
      for (std::size_t i = 0; i < p; ++i) m += c.eta[i + 1] * data.x[t][i];
    }
    const double r = data.y[t] - m;
    return -0.5 * std::log(2.0 * M_PI * c.sigma2) - 0.5 * r * r / c.sigma2;
  };

  std::vector<Cluster> clusters(1, prior_draw(rng));
  std::vector<int> labels(T, 0);
  clusters[0].n = static_cast<int>(T);

  Vec logw;
  for (int it = 0; it < iters; ++it) {
    for (std::size_t t = 0; t < T; ++t) {
      const int old = labels[t];
      clusters[old].n -= 1;
      if (clusters[old].n == 0) {
        clusters.erase(clusters.begin() + old);
        for (auto& lb : labels)
          if (lb > old) --lb;
      }
      const std::size_t nc = clusters.size();
      std::vector<Cluster> aux(n_aux);
      for (auto& a : aux) a = prior_draw(rng);
      logw.assign(nc + n_aux, 0.0);
      for (std::size_t c = 0; c < nc; ++c)
        logw[c] = std::log(static_cast<double>(clusters[c].n)) + log_f(clusters[c], t);
      for (int a = 0; a < n_aux; ++a)
        logw[nc + a] = std::log(conc / n_aux) + log_f(aux[a], t);
      const double mx = *std::max_element(logw.begin(), logw.end());
      double total = 0.0;
      for (double& v : logw) {
        v = std::exp(v - mx);
        total += v;
      }
      double target = rng.uniform() * total;
      std::size_t pick = logw.size() - 1;
      double acc = 0.0;
      for (std::size_t c = 0; c < logw.size(); ++c) {
        acc += logw[c];
        if (target <= acc) {
          pick = c;
          break;
        }
      }
      if (pick < nc) {
        labels[t] = static_cast<int>(pick);
        clusters[pick].n += 1;
      } else {
        Cluster fresh = aux[pick - nc];
        fresh.n = 1;
        clusters.push_back(fresh);
        labels[t] = static_cast<int>(clusters.size()) - 1;
      }
    }
    // refresh cluster parameters from their conditionals
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      std::vector<std::size_t> members;
      for (std::size_t t = 0; t < T; ++t)
        if (labels[t] == static_cast<int>(c)) members.push_back(t);
      if (variant == ModelVariant::iNHMM1) {
        Vec obs;
        for (std::size_t t : members) obs.push_back(data.y[t]);
        const NormalVariance nv = sample_nig(nig_posterior(spec.hyper.nig, obs), rng);
        clusters[c].mu = nv.mu;
        clusters[c].sigma2 = nv.sigma2;
      } else {
        // one conjugate pass: eta | sigma2, then sigma2 | eta
        const std::size_t q = p + 1;
        Mat prec(q, Vec(q, 0.0));
        Vec rhs(q, 0.0), row(q);
        for (std::size_t i = 0; i < q; ++i) {
          prec[i][i] = 1.0;
          rhs[i] = (i < spec.hyper.eta0.size()) ? spec.hyper.eta0[i] : 0.0;
        }
        for (std::size_t t : members) {
          row[0] = 1.0;
          for (std::size_t i = 0; i < p; ++i) row[i + 1] = data.x[t][i];
          for (std::size_t i = 0; i < q; ++i) {
            rhs[i] += row[i] * data.y[t] / clusters[c].sigma2;
            for (std::size_t j2 = 0; j2 <= i; ++j2)
              prec[i][j2] += row[i] * row[j2] / clusters[c].sigma2;
          }
        }
        for (std::size_t i = 0; i < q; ++i)
          for (std::size_t j2 = i + 1; j2 < q; ++j2) prec[i][j2] = prec[j2][i];
        cholesky(prec);
        const Vec mean = chol_solve(prec, rhs);
        clusters[c].eta = mvn_from_precision(mean, prec, rng);
        double ss = 0.0;
        for (std::size_t t : members) {
          double m = clusters[c].eta[0];
          for (std::size_t i = 0; i < p; ++i) m += clusters[c].eta[i + 1] * data.x[t][i];
          ss += (data.y[t] - m) * (data.y[t] - m);
        }
        clusters[c].sigma2 = sample_inverse_gamma(
            spec.hyper.ig_shape + 0.5 * static_cast<double>(members.size()),
            spec.hyper.ig_scale + 0.5 * ss, rng);
      }
    }
  }

  // relabel by order of first appearance so state 1 is the first-seen cluster
  std::vector<int> order;
  for (int lb : labels)
    if (std::find(order.begin(), order.end(), lb) == order.end()) order.push_back(lb);
  std::vector<int> remap(clusters.size());
  for (std::size_t i = 0; i < order.size(); ++i) remap[order[i]] = static_cast<int>(i);

  DpmmResult res;
  res.labels.resize(T);
  for (std::size_t t = 0; t < T; ++t) res.labels[t] = remap[labels[t]];
  res.emit.variant = variant;
  res.emit.global_sigma = (variant == ModelVariant::iNHMM2) && !spec.per_state_sigma;
  const std::size_t nc = order.size();
  for (std::size_t i = 0; i < nc; ++i) {
    const Cluster& c = clusters[order[i]];
    if (variant == ModelVariant::iNHMM1) {
      res.emit.mu_y.push_back(c.mu);
      res.emit.sigma2_y.push_back(c.sigma2);
    } else {
      res.emit.eta.push_back(c.eta);
      if (!res.emit.global_sigma) res.emit.sigma2_y.push_back(c.sigma2);
    }
  }
  if (res.emit.variant == ModelVariant::iNHMM2 && res.emit.global_sigma) {
    double s = 0.0;
    for (std::size_t i = 0; i < nc; ++i) s += clusters[order[i]].sigma2;
    res.emit.sigma2_global = s / static_cast<double>(nc);
  }
  return res;
}

Vec grid_argmin_l1(const Mat& grid, const Dataset& data, const std::vector<int>& z, int k) {
  const std::size_t p = data.dim();
  Vec xs(p);
  for (std::size_t c = 0; c < p; ++c) {
    double best = 0.0, best_cost = std::numeric_limits<double>::infinity();
    for (double g : grid[c]) {
      double cost = 0.0;
      for (std::size_t t = 0; t < data.size(); ++t)
        if (z[t] == k) cost += std::abs(data.x[t][c] - g);
      if (cost < best_cost) {
        best_cost = cost;
        best = g;
      }
    }
    xs[c] = best;
  }
  return xs;
}

}  // namespace

ChainState initialize_chain(const Dataset& data, const ModelSpec& spec, const McmcConfig& config,
                            Rng& rng, const ChainState* provided) {
  data.validate();
  spec.hyper.validate(data.dim());
  const std::size_t T = data.size();
  const std::size_t p = data.dim();

  if (config.init == InitMode::Provided) {
    if (!provided) throw std::invalid_argument("initialize_chain: no provided state");
    ChainState st = *provided;
    st.validate(spec.slice);
    return st;
  }

  ChainState st;
  st.z.assign(T, 1);
  st.u.assign(T, 0.25);

  bool dpmm_ok = false;
  if (config.init == InitMode::DPMM) {
    try {
      const DpmmResult dp = fit_dpmm(data, spec, config.dpmm_iters, rng);
      for (std::size_t t = 0; t < T; ++t) st.z[t] = dp.labels[t] + 1;
      st.emit = dp.emit;
      dpmm_ok = true;
    } catch (const std::exception&) {
      // degenerate data; fall through to the single-state start
      dpmm_ok = false;
    }
  }
  if (!dpmm_ok) {
    st.emit.variant = spec.variant;
    st.emit.global_sigma = (spec.variant == ModelVariant::iNHMM2) && !spec.per_state_sigma;
    if (spec.variant == ModelVariant::iNHMM1) {
      const NormalVariance nv = sample_nig(spec.hyper.nig, rng);
      st.emit.mu_y = {nv.mu};
      st.emit.sigma2_y = {nv.sigma2};
    } else {
      Vec eta(p + 1);
      for (std::size_t c = 0; c <= p; ++c)
        eta[c] = (c < spec.hyper.eta0.size() ? spec.hyper.eta0[c] : 0.0);
      st.emit.eta = {eta};
      if (st.emit.global_sigma)
        st.emit.sigma2_global = sample_inverse_gamma(spec.hyper.ig_shape, spec.hyper.ig_scale, rng);
      else
        st.emit.sigma2_y = {sample_inverse_gamma(spec.hyper.ig_shape, spec.hyper.ig_scale, rng)};
    }
  }

  const int K0 = std::max(1, *std::max_element(st.z.begin(), st.z.end()));
  st.trans.K_rep = K0;
  st.trans.alpha.assign(K0 + 1, Vec(K0, spec.hyper.mu_alpha));
  st.trans.beta.assign(K0, spec.homogeneous ? 0.0 : spec.hyper.mu_beta);
  st.trans.x_star.resize(K0);
  for (int k = 1; k <= K0; ++k)
    st.trans.x_star[k - 1] = grid_argmin_l1(spec.hyper.x_star_grid, data, st.z, k);

  update_slice(st, spec, p, rng);
  update_auxiliary_w(st, data, rng);
  st.validate(spec.slice);
  return st;
}

PosteriorSample snapshot(const ChainState& state, int iter) {
  PosteriorSample s;
  s.iter = iter;
  s.z = state.z;
  s.K = *std::max_element(state.z.begin(), state.z.end());
  s.alpha.assign(s.K + 1, Vec(s.K));
  for (int j = 0; j <= s.K; ++j)
    for (int k = 0; k < s.K; ++k) s.alpha[j][k] = state.trans.alpha[j][k];
  s.beta.assign(state.trans.beta.begin(), state.trans.beta.begin() + s.K);
  s.x_star.assign(state.trans.x_star.begin(), state.trans.x_star.begin() + s.K);
  s.emit = state.emit;
  if (s.emit.variant == ModelVariant::iNHMM1) {
    s.emit.mu_y.resize(s.K);
    s.emit.sigma2_y.resize(s.K);
  } else {
    s.emit.eta.resize(s.K);
    if (!s.emit.global_sigma) s.emit.sigma2_y.resize(s.K);
  }
  return s;
}

std::vector<PosteriorSample> run_mcmc(const Dataset& data, const ModelSpec& spec,
                                      const McmcConfig& config, Rng& rng,
                                      RunDiagnostics* diag) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ChainState state = initialize_chain(data, spec, config, rng);
  std::vector<PosteriorSample> out;
  long underflow = 0;
  for (int it = 1; it <= config.n_iter; ++it) {
    try {
      gibbs_sweep(state, data, spec, rng, &underflow, diag ? &diag->timings : nullptr);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "run_mcmc: iteration " << it << " failed: " << e.what();
      os << " | state dump: K_rep=" << state.trans.K_rep << " z=[";
      for (std::size_t t = 0; t < state.z.size(); ++t)
        os << (t ? "," : "") << state.z[t];
      os << "] u_min=" << *std::min_element(state.u.begin(), state.u.end());
      throw std::runtime_error(os.str());
    }
    if (diag) diag->K_trace.push_back(*std::max_element(state.z.begin(), state.z.end()));
    if (it > config.n_burnin && (it - config.n_burnin) % config.thin == 0) {
      out.push_back(snapshot(state, it));
    }
  }
  if (diag) {
    diag->underflow_count = underflow;
    diag->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return out;
}

void resolve_hyperpriors(ModelSpec& spec, const Dataset& data) {
  if (spec.hyper.x_star_grid.empty()) spec.hyper.x_star_grid = default_x_star_grid(data.x);
  if (spec.variant == ModelVariant::iNHMM2 && spec.hyper.eta0.empty()) {
    // least-squares fit of y on (1, x) for the eta prior mean
    const std::size_t p = data.dim();
    const std::size_t q = p + 1;
    Mat xtx(q, Vec(q, 0.0));
    Vec xty(q, 0.0), row(q);
    for (std::size_t t = 0; t < data.size(); ++t) {
      row[0] = 1.0;
      for (std::size_t c = 0; c < p; ++c) row[c + 1] = data.x[t][c];
      for (std::size_t i = 0; i < q; ++i) {
        xty[i] += row[i] * data.y[t];
        for (std::size_t j2 = 0; j2 <= i; ++j2) xtx[i][j2] += row[i] * row[j2];
      }
    }
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j2 = i + 1; j2 < q; ++j2) xtx[i][j2] = xtx[j2][i];
    for (std::size_t i = 0; i < q; ++i) xtx[i][i] += 1e-9;
    cholesky(xtx);
    spec.hyper.eta0 = chol_solve(xtx, xty);
  }
}

}  // namespace nhmm
