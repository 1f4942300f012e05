#pragma once

#include "nhmm/prediction.hpp"

namespace nhmm {

enum class DesignVariant { Design1, Design2 };

// Ground-truth finite-state model for the simulation studies.
struct TrueDesign {
  DesignVariant variant = DesignVariant::Design1;
  int n_states = 5;
  Vec x_star_percentiles = {50, 15, 85, 2, 98};
  double alpha_diag = 2.0;
  double alpha_offdiag = 0.5;
  double beta_true = 2.0;
  // Design1 emission truth
  Vec mu_y = {0.0, -2.0, 2.0, -4.0, 4.0};
  Vec sigma_y = {0.25, 0.25, 0.25, 0.25, 0.25};
  // Design2 emission truth
  Mat eta = {{1.0, 1.0}, {0.0, -2.0}, {2.0, 4.0}};
  double sigma_y_global = 1.0;
  int T = 250;
  int n_ahead = 3;
  double ar_rho = 0.95;

  static TrueDesign design1(int T = 250);
  static TrueDesign design2(int T = 250);
  void validate() const;
};

// Result of one simulated replicate: the fit dataset, the held-out truth,
// and the resolved true parameters needed for the MISE oracle.
struct SimulatedReplicate {
  Dataset data;                 // fit portion, standardized
  std::vector<int> z_true;      // length T + n_ahead
  Vec y_heldout;                // original units, length n_ahead
  TransitionParams true_trans;  // resolved truth in standardized-x units
  EmissionParams true_emit;     // in original y units
  TrueDesign design;
  Vec x_raw_series;  // length T + n_ahead, original units
  Vec y_raw_series;  // length T + n_ahead, original units
};

// AR(1) predictor, stationary start, standardized to mean 0 / sd 1.
Vec gen_ar1_predictor(int T_total, double rho, Rng& rng);

SimulatedReplicate simulate_nhmm(const TrueDesign& design, Rng& rng);

// Exact n-step predictive density under the truth, original y units.
DensityGrid true_predictive_density(const SimulatedReplicate& rep, const DensityGrid& grid,
                                    int n_ahead);

}  // namespace nhmm
