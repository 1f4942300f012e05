#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "nhmm/datagen.hpp"
#include "nhmm/io.hpp"

namespace nhmm {

struct PreprocessConfig {
  int accumulate_window = 0;  // 0 disables accumulation
  int forward_lag = 0;
  int season_period = 12;     // calendar period for the mean-fill rule
  bool standardize_x = true;
  std::optional<bool> standardize_y;  // default: iNHMM2 yes, iNHMM1 no
};

struct GridConfig {
  int n = 512;
  std::optional<double> lo, hi;  // original y units; data-driven when unset
};

struct SimulateConfig {
  int design = 1;
  int T = 250;
  int B = 20;
  int n_ahead = 3;
};

struct RunConfig {
  std::string model = "inhmm1";
  std::uint64_t seed = 1;
  double slice_kappa = 0.5;
  bool per_state_sigma = false;
  McmcConfig mcmc;
  // hyperprior knobs
  double mu_alpha = 2.0, sigma_alpha = 1.0, mu_beta = 2.0, sigma_beta = 2.0 / 3.0;
  double nig_mu0 = 0.0, nig_nu0 = 0.1;
  double sigma2_prior_mean = 0.2, sigma2_prior_sd = 1.0;
  Vec x_star_percentiles;  // empty = library default
  GridConfig grid;
  PreprocessConfig preprocess;
  SimulateConfig simulate;
  int predict_n_ahead = 3;

  static RunConfig from_json_file(const std::filesystem::path& path);
  static RunConfig from_json_text(const std::string& text);
  ModelSpec make_spec() const;
  McmcConfig make_mcmc() const;
};

// Rolling-sum covariate preprocessing: out[t] = sum of raw[t-lag-window+1 ..
// t-lag] (1-based). Rows whose window reaches before the start of the series
// get the mean of the computed values at the same seasonal position; future
// horizons needing unobserved raw months use the seasonal mean of the raw
// series. Returns the predictor for t = 1..T and the derived future values.
void accumulated_predictor(const Vec& raw, int window, int lag, int period, int n_future,
                           Vec& predictor, Vec& future);

// Standardize a raw series into a Dataset according to the preprocess
// settings, recording the constants in `meta`.
Dataset prepare_dataset(const RawSeries& raw, const RunConfig& cfg, FitMeta& meta);

int cmd_simulate(const RunConfig& cfg, const std::filesystem::path& outdir);
int cmd_fit(const RunConfig& cfg, const std::filesystem::path& data_csv,
            const std::filesystem::path& samples_out, const std::filesystem::path& diag_out);
int cmd_predict(const RunConfig& cfg, const std::filesystem::path& samples_path,
                const std::optional<std::filesystem::path>& future_x_csv,
                const std::filesystem::path& outdir, const std::string& prefix);
int cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& estimates_dir,
                 const std::filesystem::path& truth_dir, const std::filesystem::path& report_out);
// simulate -> fit (model + its homogeneous baseline) -> predict -> evaluate,
// parallel across replicates.
int cmd_replicate(const RunConfig& cfg, const std::filesystem::path& outdir);

// Worker-thread count: NHMM_THREADS, defaulting to the logical core count.
int worker_threads();

}  // namespace nhmm
