#pragma once

#include <vector>

#include "nhmm/sampler.hpp"

namespace nhmm {

// Evaluation grid: N+1 points, N density values attached to points 1..N.
struct DensityGrid {
  Vec points;  // strictly increasing, size N + 1
  Vec values;  // size N
  Vec deltas;  // size N, points[i] - points[i-1]

  static DensityGrid uniform(double lo, double hi, int n);
  std::size_t cells() const { return values.size(); }
  double mass() const;  // Riemann sum of values * deltas
  void validate() const;
};

// Grid covering [min y - 3 sd, max y + 3 sd] with the given cell count.
DensityGrid default_grid(const Vec& y, int n = 512);

// Monte Carlo estimate of the n-step-ahead predictive density: per posterior
// sample, the chain is propagated from z_T through the K^(m)-truncated,
// renormalized transition law at the future covariates, then mixed with the
// emission densities. Dynamic programming, O(M n K^2) plus the grid sweep.
DensityGrid predictive_density(const std::vector<PosteriorSample>& samples, const Mat& x_future,
                               const DensityGrid& grid, int n_ahead,
                               long* underflow_count = nullptr);

// Same propagation for one explicit parameter set (used for the simulation
// truth, where the finite-state parameters and z_T are known).
DensityGrid predictive_density_single(const TransitionParams& trans, const EmissionParams& emit,
                                      int z_T, const Mat& x_future, const DensityGrid& grid,
                                      int n_ahead);

// Literal nested-sum evaluation of the same estimator; exponential in n, for
// oracle checks only.
double predictive_density_nested_at(const TransitionParams& trans, const EmissionParams& emit,
                                    int z_T, const Mat& x_future, double y, int n_ahead);

// Integrated squared error between two densities on identical grids.
double mise(const DensityGrid& truth, const DensityGrid& est);

// Posterior mean of the fitted emission mean at each t, destandardized.
Vec posterior_mean_series(const std::vector<PosteriorSample>& samples, const Dataset& data);

// Map a density from standardized to original units (change of variables).
DensityGrid destandardize_density(const DensityGrid& grid, double y_mean, double y_sd);
// Map an original-units grid into standardized units (values untouched).
Vec standardized_points(const Vec& points, double y_mean, double y_sd);

}  // namespace nhmm
