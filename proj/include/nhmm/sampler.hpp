#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "nhmm/model.hpp"

namespace nhmm {

// Full model choice for a fit: variant, homogeneity (beta pinned at zero),
// and the iNHMM2 variance mode.
struct ModelSpec {
  ModelVariant variant = ModelVariant::iNHMM1;
  bool homogeneous = false;     // iHMMP1 / iHMMP2 baselines
  bool per_state_sigma = false; // iNHMM2 only; global otherwise
  Hyperpriors hyper;
  SliceSequence slice;
};

enum class InitMode { DPMM, SingleState, Provided };

struct McmcConfig {
  int n_iter = 10000;
  int n_burnin = 3000;
  int thin = 1;
  std::uint64_t seed = 1;
  InitMode init = InitMode::DPMM;
  int dpmm_iters = 500;

  void validate() const;
};

// Immutable per-iteration snapshot, truncated at K = max z.
struct PosteriorSample {
  int iter = 0;
  std::vector<int> z;
  int K = 0;
  Mat alpha;    // K + 1 rows (row 0 = initial state), K columns
  Vec beta;
  Mat x_star;
  EmissionParams emit;  // arrays truncated to K
};

struct PhaseTimings {
  double slice = 0, messages = 0, latent = 0, w = 0;
  double alpha = 0, beta = 0, x_star = 0, emission = 0;
};

struct RunDiagnostics {
  std::vector<int> K_trace;
  long underflow_count = 0;
  double seconds = 0.0;
  PhaseTimings timings;
};

// --- individual Gibbs steps (exposed for tests and the Geweke harness) ---

// u_t ~ Uniform(0, xi_{z_t}); extends/shrinks the representation to
// max(max z, cover_size(min u)).
void update_slice(ChainState& state, const ModelSpec& spec, std::size_t p, Rng& rng);

// {k: xi_k > u_t} as 1..m; never empty for valid u.
int active_set_max(double u, const SliceSequence& xi);

// Backward messages beta_t(k) for k = 1..K_rep, max-normalized per t.
// probit[t] caches the probit matrix at x_t.
Mat backward_messages(const ChainState& state, const Dataset& data,
                      const std::vector<Mat>& probit, const SliceSequence& xi);

// Forward draw of z_1:T given the messages; exact joint sample.
std::vector<int> sample_latent_sequence(const ChainState& state, const Mat& messages,
                                        const Dataset& data, const std::vector<Mat>& probit,
                                        const SliceSequence& xi, Rng& rng);

void update_auxiliary_w(ChainState& state, const Dataset& data, Rng& rng);
void update_alpha(ChainState& state, const Dataset& data, const Hyperpriors& hyper, Rng& rng);
void update_beta(ChainState& state, const Dataset& data, const Hyperpriors& hyper, Rng& rng);
void update_x_star(ChainState& state, const Dataset& data, const Hyperpriors& hyper, Rng& rng);
void update_emission_inhmm1(ChainState& state, const Dataset& data, const Hyperpriors& hyper,
                            Rng& rng);
void update_emission_inhmm2(ChainState& state, const Dataset& data, const Hyperpriors& hyper,
                            bool per_state_sigma, Rng& rng);

// One full Gibbs sweep in the fixed scan order.
void gibbs_sweep(ChainState& state, const Dataset& data, const ModelSpec& spec, Rng& rng,
                 long* underflow_count = nullptr, PhaseTimings* timings = nullptr);

// DPMM-based (or fallback) initialization.
ChainState initialize_chain(const Dataset& data, const ModelSpec& spec, const McmcConfig& config,
                            Rng& rng, const ChainState* provided = nullptr);

PosteriorSample snapshot(const ChainState& state, int iter);

std::vector<PosteriorSample> run_mcmc(const Dataset& data, const ModelSpec& spec,
                                      const McmcConfig& config, Rng& rng,
                                      RunDiagnostics* diag = nullptr);

// Fills hyperprior fields that depend on the data: the x_star candidate grid
// and, for iNHMM2, the least-squares eta0.
void resolve_hyperpriors(ModelSpec& spec, const Dataset& data);

}  // namespace nhmm
