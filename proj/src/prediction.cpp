#include "nhmm/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nhmm {

DensityGrid DensityGrid::uniform(double lo, double hi, int n) {
  if (!(hi > lo) || n < 1) throw std::invalid_argument("DensityGrid: bad bounds");
  DensityGrid g;
  g.points.resize(n + 1);
  for (int i = 0; i <= n; ++i)
    g.points[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
  g.values.assign(n, 0.0);
  g.deltas.assign(n, (hi - lo) / static_cast<double>(n));
  return g;
}

double DensityGrid::mass() const {
  double m = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * deltas[i];
  return m;
}

void DensityGrid::validate() const {
  if (points.size() != values.size() + 1 || deltas.size() != values.size())
    throw std::invalid_argument("DensityGrid: size mismatch");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw std::invalid_argument("DensityGrid: nonpositive delta");
    if (!(points[i + 1] > points[i]))
      throw std::invalid_argument("DensityGrid: points not strictly increasing");
    if (std::fabs((points[i + 1] - points[i]) - deltas[i]) > 1e-9 * (1.0 + deltas[i]))
      throw std::invalid_argument("DensityGrid: deltas inconsistent with points");
  }
}

DensityGrid default_grid(const Vec& y, int n) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sd = 0.0;
  for (double v : y) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / static_cast<double>(y.size() > 1 ? y.size() - 1 : 1));
  if (sd <= 0.0) sd = 1.0;
  const double lo = *std::min_element(y.begin(), y.end()) - 3.0 * sd;
  const double hi = *std::max_element(y.begin(), y.end()) + 3.0 * sd;
  return DensityGrid::uniform(lo, hi, n);
}

namespace {

TransitionParams sample_trans(const PosteriorSample& s) {
  TransitionParams t;
  t.alpha = s.alpha;
  t.beta = s.beta;
  t.x_star = s.x_star;
  t.K_rep = s.K;
  return t;
}

// Add one sample's n-step predictive density into `acc`.
void accumulate_sample(const TransitionParams& trans, const EmissionParams& emit, int z_T,
                       const Mat& x_future, const DensityGrid& grid, int n_ahead, Vec& acc,
                       long* underflow_count) {
  const int K = trans.K_rep;
  Vec v(K, 0.0);
  // first step conditions on the sampled z_T
  v = stick_weights_truncated(z_T, x_future[0], trans, K, underflow_count);
  for (int step = 2; step <= n_ahead; ++step) {
    Vec next(K, 0.0);
    const Mat probit = probit_matrix(x_future[step - 1], trans);
    for (int j = 1; j <= K; ++j) {
      if (v[j - 1] == 0.0) continue;
      const Vec row = stick_row_from_probit(probit, j, K, underflow_count);
      for (int k = 0; k < K; ++k) next[k] += v[j - 1] * row[k];
    }
    v = std::move(next);
  }
  const Vec& x_last = x_future[n_ahead - 1];
  for (std::size_t i = 0; i < grid.cells(); ++i) {
    const double y = grid.points[i + 1];
    double f = 0.0;
    for (int k = 1; k <= K; ++k)
      f += v[k - 1] * std::exp(emit.log_density(k, y, x_last));
    acc[i] += f;
  }
}

}  // namespace

DensityGrid predictive_density(const std::vector<PosteriorSample>& samples, const Mat& x_future,
                               const DensityGrid& grid, int n_ahead, long* underflow_count) {
  grid.validate();
  if (samples.empty()) throw std::invalid_argument("predictive_density: no samples");
  if (n_ahead < 1 || static_cast<int>(x_future.size()) < n_ahead)
    throw std::invalid_argument("predictive_density: n exceeds available future covariates");
  Vec acc(grid.cells(), 0.0);
  for (const PosteriorSample& s : samples) {
    accumulate_sample(sample_trans(s), s.emit, s.z.back(), x_future, grid, n_ahead, acc,
                      underflow_count);
  }
  DensityGrid out = grid;
  const double inv_m = 1.0 / static_cast<double>(samples.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out.values[i] = acc[i] * inv_m;
  return out;
}

DensityGrid predictive_density_single(const TransitionParams& trans, const EmissionParams& emit,
                                      int z_T, const Mat& x_future, const DensityGrid& grid,
                                      int n_ahead) {
  grid.validate();
  if (n_ahead < 1 || static_cast<int>(x_future.size()) < n_ahead)
    throw std::invalid_argument("predictive_density_single: n exceeds future covariates");
  Vec acc(grid.cells(), 0.0);
  accumulate_sample(trans, emit, z_T, x_future, grid, n_ahead, acc, nullptr);
  DensityGrid out = grid;
  out.values = acc;
  return out;
}

double predictive_density_nested_at(const TransitionParams& trans, const EmissionParams& emit,
                                    int z_T, const Mat& x_future, double y, int n_ahead) {
  const int K = trans.K_rep;
  // precompute normalized transition rows for every step
  std::vector<Mat> rows(n_ahead, Mat(K + 1));
  for (int step = 1; step <= n_ahead; ++step)
    for (int j = 0; j <= K; ++j)
      rows[step - 1][j] = stick_weights_truncated(j, x_future[step - 1], trans, K);

  std::vector<int> path(n_ahead, 1);
  double total = 0.0;
  for (;;) {
    double p = rows[0][z_T][path[0] - 1];
    for (int step = 2; step <= n_ahead; ++step)
      p *= rows[step - 1][path[step - 2]][path[step - 1] - 1];
    total += p * std::exp(emit.log_density(path[n_ahead - 1], y, x_future[n_ahead - 1]));
    int pos = n_ahead - 1;
    while (pos >= 0 && path[pos] == K) {
      path[pos] = 1;
      --pos;
    }
    if (pos < 0) break;
    path[pos] += 1;
  }
  return total;
}

double mise(const DensityGrid& truth, const DensityGrid& est) {
  truth.validate();
  est.validate();
  if (truth.points.size() != est.points.size())
    throw std::invalid_argument("mise: grid mismatch");
  for (std::size_t i = 0; i < truth.points.size(); ++i) {
    if (std::abs(truth.points[i] - est.points[i]) > 1e-9)
      throw std::invalid_argument("mise: grid mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < truth.cells(); ++i) {
    const double d = truth.values[i] - est.values[i];
    s += d * d * truth.deltas[i];
  }
  return s;
}

Vec posterior_mean_series(const std::vector<PosteriorSample>& samples, const Dataset& data) {
  if (samples.empty()) throw std::invalid_argument("posterior_mean_series: no samples");
  const std::size_t T = data.size();
  Vec out(T, 0.0);
  for (const PosteriorSample& s : samples) {
    for (std::size_t t = 0; t < T; ++t) out[t] += s.emit.mean(s.z[t], data.x[t]);
  }
  const double inv_m = 1.0 / static_cast<double>(samples.size());
  for (double& v : out) v = v * inv_m * data.y_raw_sd + data.y_raw_mean;
  return out;
}

DensityGrid destandardize_density(const DensityGrid& grid, double y_mean, double y_sd) {
  DensityGrid out = grid;
  for (double& p : out.points) p = p * y_sd + y_mean;
  for (std::size_t i = 0; i < out.deltas.size(); ++i) out.deltas[i] *= y_sd;
  for (double& v : out.values) v /= y_sd;
  return out;
}

Vec standardized_points(const Vec& points, double y_mean, double y_sd) {
  Vec out = points;
  for (double& p : out) p = (p - y_mean) / y_sd;
  return out;
}

}  // namespace nhmm
