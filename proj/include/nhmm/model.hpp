#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nhmm/distributions.hpp"
#include "nhmm/rng.hpp"

namespace nhmm {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;  // row-major, ragged-free

// Aligned covariate/response series in standardized units, plus the metadata
// needed to map results back to the original scale.
struct Dataset {
  Mat x;  // length T, each of dimension p
  Vec y;  // length T
  Vec x_raw_mean, x_raw_sd;  // per component, original units
  double y_raw_mean = 0.0;
  double y_raw_sd = 1.0;
  Mat future_x;  // covariates for T+1..T+n, standardized; may be empty

  std::size_t size() const { return y.size(); }
  std::size_t dim() const { return x.empty() ? 0 : x.front().size(); }
  void validate() const;
};

// Standardize columns of a raw series in place, returning the mean/sd used.
void standardize_columns(Mat& x, Vec& mean, Vec& sd);
void standardize_series(Vec& y, double& mean, double& sd);

enum class ModelVariant { iNHMM1, iNHMM2 };

// Instantiated prefix of the infinite transition-parameter arrays.
// Row 0 of alpha is the initial state z0 = 0; rows 1..K_rep are regular states.
struct TransitionParams {
  Mat alpha;    // (K_rep + 1) rows, K_rep columns; alpha[j][k-1]
  Vec beta;     // K_rep entries, all > 0 (pinned to 0 for homogeneous fits)
  Mat x_star;   // K_rep entries, each a covariate vector
  int K_rep = 0;

  void validate() const;
};

struct EmissionParams {
  ModelVariant variant = ModelVariant::iNHMM1;
  // iNHMM1: per-state Normal mean/variance
  Vec mu_y;
  Vec sigma2_y;  // also holds per-state variances for iNHMM2 per-state mode
  // iNHMM2: per-state regression coefficients (intercept first)
  Mat eta;
  bool global_sigma = true;
  double sigma2_global = 1.0;

  int size() const {
    return static_cast<int>(variant == ModelVariant::iNHMM1 ? mu_y.size() : eta.size());
  }
  double mean(int k, const Vec& x) const;            // emission mean for state k (1-based)
  double variance(int k) const;
  double log_density(int k, double y, const Vec& x) const;
  void validate() const;
};

struct Hyperpriors {
  double mu_alpha = 2.0;
  double sigma_alpha = 1.0;
  double mu_beta = 2.0;
  double sigma_beta = 2.0 / 3.0;
  // iNHMM1 emission prior
  NIGParams nig{0.0, 0.1, 2.04, 0.208};
  // iNHMM2 emission prior: eta_k ~ N(eta0, I), sigma^2 ~ InvGamma(ig_shape, ig_scale)
  Vec eta0;
  double ig_shape = 2.04;
  double ig_scale = 0.208;
  // candidate values for each covariate component of x_star
  Mat x_star_grid;

  void validate(std::size_t p) const;
};

// Default per-component x_star candidate grid: empirical percentiles
// {1,5,10,20,...,90,95,99} of the observed covariates.
Mat default_x_star_grid(const Mat& x);

// Linear-interpolation (type-7) percentile of a sample; p in [0,100].
double percentile(Vec sorted_or_not, double p);

// Deterministic slice thresholds xi_k = kappa^k.
struct SliceSequence {
  double kappa = 0.5;

  double xi(int k) const { return std::pow(kappa, k); }
  // Largest k with xi(k) > u, i.e. the size of the active set {k: xi_k > u}.
  int active_max(double u) const;
  // Smallest K with xi(K) <= u; the representation is kept at least this big.
  int cover_size(double u) const { return active_max(u) + 1; }
};

// h(x; x_star) = -||x - x_star||^2
double kernel_h(const Vec& x, const Vec& x_star);

// pi_k(j, x) of the probit stick-breaking transition law. k is 1-based,
// j in 0..K_rep.
double stick_weight(int j, int k, const Vec& x, const TransitionParams& trans);

// First K weights renormalized to sum to one. Underflow of the whole row
// falls back to the uniform vector; `underflow_count`, when given, is
// incremented so callers can report it.
Vec stick_weights_truncated(int j, const Vec& x, const TransitionParams& trans, int K,
                            long* underflow_count = nullptr);

// Probit success probabilities Phi(alpha_jl + beta_l h(x; x_star_l)) for all
// rows j = 0..K_rep and columns l = 1..K_rep at one covariate value. The
// stick weights for any (j,k) are products over one row of this matrix.
Mat probit_matrix(const Vec& x, const TransitionParams& trans);

// Row j of the truncated, renormalized transition law computed from a
// precomputed probit matrix.
Vec stick_row_from_probit(const Mat& probit, int j, int K, long* underflow_count = nullptr);

// Lazily grow the parameter arrays to K_new, drawing fresh entries from
// their priors. Requires K_new > K_rep.
void extend_representation(TransitionParams& trans, EmissionParams& emit, int K_new,
                           const Hyperpriors& hyper, std::size_t p, bool homogeneous,
                           Rng& rng);

// Drop columns beyond K_new (all of which carry no data and are therefore
// prior draws). Requires K_new >= 1.
void shrink_representation(TransitionParams& trans, EmissionParams& emit, int K_new);

// Latent chain state for one MCMC iteration.
struct ChainState {
  std::vector<int> z;  // length T, values in 1..K_rep
  Vec u;               // length T, u_t in (0, xi_{z_t})
  TransitionParams trans;
  EmissionParams emit;
  // w[t] has z[t] entries; w[t][l-1] is the auxiliary variable for level l.
  Mat w;

  void validate(const SliceSequence& xi) const;
};

}  // namespace nhmm
