#include "nhmm/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace nhmm {

using nlohmann::json;
namespace fs = std::filesystem;

int worker_threads() {
  if (const char* env = std::getenv("NHMM_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

// Run fn(i) for i in [0, n) on up to worker_threads() threads; the first
// exception wins and is rethrown on the caller's thread.
void parallel_for(int n, const std::function<void(int)>& fn) {
  const int nthreads = std::min(worker_threads(), std::max(n, 1));
  if (nthreads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < nthreads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown config key '" + it.key() + "' in " + where);
}

double get_or(const json& j, const char* key, double dflt) {
  return j.contains(key) ? j.at(key).get<double>() : dflt;
}
int get_or(const json& j, const char* key, int dflt) {
  return j.contains(key) ? j.at(key).get<int>() : dflt;
}
bool get_or(const json& j, const char* key, bool dflt) {
  return j.contains(key) ? j.at(key).get<bool>() : dflt;
}

double seasonal_mean(const Vec& v, int pos, int period) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t t = pos; t < v.size(); t += period) {
    sum += v[t];
    ++n;
  }
  if (n == 0) {  // series shorter than one period; fall back to overall mean
    for (double x : v) sum += x;
    n = static_cast<int>(v.size());
  }
  return sum / n;
}

std::string baseline_of(const std::string& model) {
  if (model == "inhmm1") return "ihmmp1";
  if (model == "inhmm2") return "ihmmp2";
  throw ConfigError("replicate study needs model inhmm1 or inhmm2, got " + model);
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  require_keys(j,
               {"model", "seed", "slice_kappa", "per_state_sigma", "mcmc", "hyper",
                "x_star_percentiles", "grid", "preprocess", "simulate", "predict_n_ahead"},
               "config root");
  RunConfig cfg;
  if (j.contains("model")) cfg.model = j.at("model").get<std::string>();
  variant_of(cfg.model);  // validates the name
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.slice_kappa = get_or(j, "slice_kappa", cfg.slice_kappa);
  if (!(cfg.slice_kappa > 0.0 && cfg.slice_kappa < 1.0))
    throw ConfigError("slice_kappa must be in (0,1)");
  cfg.per_state_sigma = get_or(j, "per_state_sigma", cfg.per_state_sigma);
  if (j.contains("mcmc")) {
    const json& m = j.at("mcmc");
    require_keys(m, {"n_iter", "n_burnin", "thin", "init", "dpmm_iters"}, "mcmc");
    cfg.mcmc.n_iter = get_or(m, "n_iter", cfg.mcmc.n_iter);
    cfg.mcmc.n_burnin = get_or(m, "n_burnin", cfg.mcmc.n_burnin);
    cfg.mcmc.thin = get_or(m, "thin", cfg.mcmc.thin);
    cfg.mcmc.dpmm_iters = get_or(m, "dpmm_iters", cfg.mcmc.dpmm_iters);
    if (m.contains("init")) {
      const std::string init = m.at("init").get<std::string>();
      if (init == "dpmm")
        cfg.mcmc.init = InitMode::DPMM;
      else if (init == "single")
        cfg.mcmc.init = InitMode::SingleState;
      else
        throw ConfigError("mcmc.init must be 'dpmm' or 'single', got '" + init + "'");
    }
  }
  if (j.contains("hyper")) {
    const json& h = j.at("hyper");
    require_keys(h,
                 {"mu_alpha", "sigma_alpha", "mu_beta", "sigma_beta", "nig_mu0", "nig_nu0",
                  "sigma2_prior_mean", "sigma2_prior_sd"},
                 "hyper");
    cfg.mu_alpha = get_or(h, "mu_alpha", cfg.mu_alpha);
    cfg.sigma_alpha = get_or(h, "sigma_alpha", cfg.sigma_alpha);
    cfg.mu_beta = get_or(h, "mu_beta", cfg.mu_beta);
    cfg.sigma_beta = get_or(h, "sigma_beta", cfg.sigma_beta);
    cfg.nig_mu0 = get_or(h, "nig_mu0", cfg.nig_mu0);
    cfg.nig_nu0 = get_or(h, "nig_nu0", cfg.nig_nu0);
    cfg.sigma2_prior_mean = get_or(h, "sigma2_prior_mean", cfg.sigma2_prior_mean);
    cfg.sigma2_prior_sd = get_or(h, "sigma2_prior_sd", cfg.sigma2_prior_sd);
    if (cfg.sigma_alpha <= 0 || cfg.sigma_beta <= 0 || cfg.nig_nu0 <= 0 ||
        cfg.sigma2_prior_mean <= 0 || cfg.sigma2_prior_sd <= 0)
      throw ConfigError("hyperprior scales must be positive");
  }
  if (j.contains("x_star_percentiles")) {
    cfg.x_star_percentiles = j.at("x_star_percentiles").get<Vec>();
    for (double p : cfg.x_star_percentiles)
      if (p < 0.0 || p > 100.0) throw ConfigError("x_star_percentiles must lie in [0,100]");
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    require_keys(g, {"n", "lo", "hi"}, "grid");
    cfg.grid.n = get_or(g, "n", cfg.grid.n);
    if (cfg.grid.n < 2) throw ConfigError("grid.n must be at least 2");
    if (g.contains("lo")) cfg.grid.lo = g.at("lo").get<double>();
    if (g.contains("hi")) cfg.grid.hi = g.at("hi").get<double>();
    if (cfg.grid.lo.has_value() != cfg.grid.hi.has_value())
      throw ConfigError("grid.lo and grid.hi must be given together");
    if (cfg.grid.lo && *cfg.grid.lo >= *cfg.grid.hi)
      throw ConfigError("grid.lo must be below grid.hi");
  }
  if (j.contains("preprocess")) {
    const json& p = j.at("preprocess");
    require_keys(p,
                 {"accumulate_window", "forward_lag", "season_period", "standardize_x",
                  "standardize_y"},
                 "preprocess");
    cfg.preprocess.accumulate_window = get_or(p, "accumulate_window", 0);
    cfg.preprocess.forward_lag = get_or(p, "forward_lag", 0);
    cfg.preprocess.season_period = get_or(p, "season_period", 12);
    cfg.preprocess.standardize_x = get_or(p, "standardize_x", true);
    if (p.contains("standardize_y"))
      cfg.preprocess.standardize_y = p.at("standardize_y").get<bool>();
    if (cfg.preprocess.accumulate_window < 0 || cfg.preprocess.forward_lag < 0 ||
        cfg.preprocess.season_period < 1)
      throw ConfigError("preprocess windows must be non-negative, season_period positive");
  }
  if (j.contains("simulate")) {
    const json& s = j.at("simulate");
    require_keys(s, {"design", "T", "B", "n_ahead"}, "simulate");
    cfg.simulate.design = get_or(s, "design", 1);
    cfg.simulate.T = get_or(s, "T", 250);
    cfg.simulate.B = get_or(s, "B", 20);
    cfg.simulate.n_ahead = get_or(s, "n_ahead", 3);
    if (cfg.simulate.design != 1 && cfg.simulate.design != 2)
      throw ConfigError("simulate.design must be 1 or 2");
    if (cfg.simulate.T < 10 || cfg.simulate.B < 1 || cfg.simulate.n_ahead < 1)
      throw ConfigError("simulate sizes out of range");
  }
  cfg.predict_n_ahead = get_or(j, "predict_n_ahead", cfg.predict_n_ahead);
  if (cfg.predict_n_ahead < 1) throw ConfigError("predict_n_ahead must be >= 1");
  try {
    cfg.make_mcmc().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig RunConfig::from_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config: " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return from_json_text(os.str());
}

ModelSpec RunConfig::make_spec() const {
  ModelSpec spec;
  spec.variant = variant_of(model);
  spec.homogeneous = is_homogeneous(model);
  spec.per_state_sigma = per_state_sigma;
  spec.slice.kappa = slice_kappa;
  spec.hyper.mu_alpha = mu_alpha;
  spec.hyper.sigma_alpha = sigma_alpha;
  spec.hyper.mu_beta = mu_beta;
  spec.hyper.sigma_beta = sigma_beta;
  const double shape = 2.0 + sigma2_prior_mean * sigma2_prior_mean /
                                 (sigma2_prior_sd * sigma2_prior_sd);
  const double scale = sigma2_prior_mean * (shape - 1.0);
  spec.hyper.nig = NIGParams{nig_mu0, nig_nu0, shape, scale};
  spec.hyper.ig_shape = shape;
  spec.hyper.ig_scale = scale;
  return spec;
}

McmcConfig RunConfig::make_mcmc() const {
  McmcConfig m = mcmc;
  m.seed = seed;
  return m;
}

void accumulated_predictor(const Vec& raw, int window, int lag, int period, int n_future,
                           Vec& predictor, Vec& future) {
  if (window < 1) throw ConfigError("accumulation window must be >= 1");
  const int T = static_cast<int>(raw.size());
  if (T < window + lag)
    throw DataError("series too short for accumulation window + lag");
  predictor.assign(T, 0.0);
  std::vector<char> computed(T, 0);
  // predictor[t] (0-based) = sum raw[t-lag-window+1 .. t-lag]
  for (int t = 0; t < T; ++t) {
    const int first = t - lag - window + 1;
    const int last = t - lag;
    if (first < 0) continue;
    double s = 0.0;
    for (int i = first; i <= last; ++i) s += raw[i];
    predictor[t] = s;
    computed[t] = 1;
  }
  // early rows: mean of computed predictor values at the same seasonal position
  Vec obs_by_pos(period, 0.0);
  std::vector<int> n_by_pos(period, 0);
  for (int t = 0; t < T; ++t) {
    if (!computed[t]) continue;
    obs_by_pos[t % period] += predictor[t];
    ++n_by_pos[t % period];
  }
  double overall = 0.0;
  int n_overall = 0;
  for (int t = 0; t < T; ++t)
    if (computed[t]) {
      overall += predictor[t];
      ++n_overall;
    }
  overall /= std::max(n_overall, 1);
  for (int t = 0; t < T; ++t) {
    if (computed[t]) continue;
    const int pos = t % period;
    predictor[t] = n_by_pos[pos] > 0 ? obs_by_pos[pos] / n_by_pos[pos] : overall;
  }
  // future horizons: extend the raw series with its seasonal mean where needed
  future.assign(n_future, 0.0);
  for (int s = 0; s < n_future; ++s) {
    const int t = T + s;
    double sum = 0.0;
    for (int i = t - lag - window + 1; i <= t - lag; ++i)
      sum += i < T ? raw[i] : seasonal_mean(raw, i % period, period);
    future[s] = sum;
  }
}

Dataset prepare_dataset(const RawSeries& raw, const RunConfig& cfg, FitMeta& meta) {
  if (raw.y.empty()) throw DataError("empty series");
  Dataset data;
  Mat future_raw;
  if (cfg.preprocess.accumulate_window > 0) {
    if (raw.x.front().size() != 1)
      throw DataError("accumulation preprocessing needs a single covariate column");
    Vec col(raw.y.size());
    for (std::size_t t = 0; t < col.size(); ++t) col[t] = raw.x[t][0];
    Vec pred, fut;
    accumulated_predictor(col, cfg.preprocess.accumulate_window, cfg.preprocess.forward_lag,
                          cfg.preprocess.season_period, cfg.predict_n_ahead, pred, fut);
    data.x.assign(pred.size(), Vec(1));
    for (std::size_t t = 0; t < pred.size(); ++t) data.x[t][0] = pred[t];
    future_raw.assign(fut.size(), Vec(1));
    for (std::size_t s = 0; s < fut.size(); ++s) future_raw[s][0] = fut[s];
  } else {
    data.x = raw.x;
  }
  data.y = raw.y;

  const std::size_t p = data.dim();
  if (cfg.preprocess.standardize_x) {
    standardize_columns(data.x, data.x_raw_mean, data.x_raw_sd);
  } else {
    data.x_raw_mean.assign(p, 0.0);
    data.x_raw_sd.assign(p, 1.0);
  }
  data.future_x = future_raw;
  for (auto& row : data.future_x)
    for (std::size_t c = 0; c < p; ++c)
      row[c] = (row[c] - data.x_raw_mean[c]) / data.x_raw_sd[c];

  const bool std_y = cfg.preprocess.standardize_y.value_or(variant_of(cfg.model) ==
                                                           ModelVariant::iNHMM2);
  if (std_y) {
    standardize_series(data.y, data.y_raw_mean, data.y_raw_sd);
  } else {
    data.y_raw_mean = 0.0;
    data.y_raw_sd = 1.0;
  }
  data.validate();

  meta.model = cfg.model;
  meta.seed = cfg.seed;
  meta.T = data.size();
  meta.p = p;
  meta.x_mean = data.x_raw_mean;
  meta.x_sd = data.x_raw_sd;
  meta.y_mean = data.y_raw_mean;
  meta.y_sd = data.y_raw_sd;
  meta.future_x = data.future_x;
  meta.per_state_sigma = cfg.per_state_sigma;
  const auto [lo_it, hi_it] = std::minmax_element(data.y.begin(), data.y.end());
  meta.y_min_std = *lo_it;
  meta.y_max_std = *hi_it;
  double mean = 0.0;
  for (double v : data.y) mean += v;
  mean /= data.y.size();
  double var = 0.0;
  for (double v : data.y) var += (v - mean) * (v - mean);
  meta.y_sd_std = std::sqrt(var / std::max<std::size_t>(data.y.size() - 1, 1));
  return data;
}

namespace {

Mat grid_from_percentiles(const Mat& x, const Vec& percentiles) {
  const std::size_t p = x.front().size();
  Mat grid(p);
  for (std::size_t c = 0; c < p; ++c) {
    Vec col(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) col[t] = x[t][c];
    for (double q : percentiles) grid[c].push_back(percentile(col, q));
    std::sort(grid[c].begin(), grid[c].end());
    grid[c].erase(std::unique(grid[c].begin(), grid[c].end()), grid[c].end());
  }
  return grid;
}

// Shared core of `fit`: dataset -> posterior samples + diagnostics.
std::vector<PosteriorSample> fit_dataset(const Dataset& data, const RunConfig& cfg,
                                         RunDiagnostics& diag) {
  ModelSpec spec = cfg.make_spec();
  if (!cfg.x_star_percentiles.empty())
    spec.hyper.x_star_grid = grid_from_percentiles(data.x, cfg.x_star_percentiles);
  resolve_hyperpriors(spec, data);
  Rng rng(cfg.seed);
  return run_mcmc(data, spec, cfg.make_mcmc(), rng, &diag);
}

json diagnostics_json(const RunConfig& cfg, const RunDiagnostics& diag,
                      std::size_t n_samples) {
  double K_mean = 0.0;
  int K_max = 0;
  for (int k : diag.K_trace) {
    K_mean += k;
    K_max = std::max(K_max, k);
  }
  if (!diag.K_trace.empty()) K_mean /= diag.K_trace.size();
  json j;
  j["status"] = "ok";
  j["model"] = cfg.model;
  j["seed"] = cfg.seed;
  j["n_iter"] = cfg.mcmc.n_iter;
  j["n_burnin"] = cfg.mcmc.n_burnin;
  j["thin"] = cfg.mcmc.thin;
  j["n_samples"] = n_samples;
  j["seconds"] = diag.seconds;
  j["underflow_count"] = diag.underflow_count;
  j["K_mean"] = K_mean;
  j["K_max"] = K_max;
  j["K_final"] = diag.K_trace.empty() ? 0 : diag.K_trace.back();
  j["phase_seconds"] = {{"slice", diag.timings.slice},
                        {"messages", diag.timings.messages},
                        {"latent", diag.timings.latent},
                        {"w", diag.timings.w},
                        {"alpha", diag.timings.alpha},
                        {"beta", diag.timings.beta},
                        {"x_star", diag.timings.x_star},
                        {"emission", diag.timings.emission}};
  return j;
}

// Prediction grid in standardized (model) units from config + meta.
DensityGrid make_prediction_grid(const RunConfig& cfg, const FitMeta& meta) {
  double lo, hi;
  if (cfg.grid.lo) {
    lo = (*cfg.grid.lo - meta.y_mean) / meta.y_sd;
    hi = (*cfg.grid.hi - meta.y_mean) / meta.y_sd;
  } else {
    lo = meta.y_min_std - 3.0 * meta.y_sd_std;
    hi = meta.y_max_std + 3.0 * meta.y_sd_std;
  }
  return DensityGrid::uniform(lo, hi, cfg.grid.n);
}

}  // namespace

int cmd_fit(const RunConfig& cfg, const fs::path& data_csv, const fs::path& samples_out,
            const fs::path& diag_out) {
  const RawSeries raw = read_series_csv(data_csv);
  FitMeta meta;
  const Dataset data = prepare_dataset(raw, cfg, meta);
  RunDiagnostics diag;
  const std::vector<PosteriorSample> samples = fit_dataset(data, cfg, diag);
  write_samples_jsonl(samples_out, meta, samples);
  atomic_write_text(diag_out, diagnostics_json(cfg, diag, samples.size()).dump(2) + "\n");
  std::cout << "fit: " << samples.size() << " samples, K_final "
            << (diag.K_trace.empty() ? 0 : diag.K_trace.back()) << ", "
            << diag.seconds << " s -> " << samples_out.string() << "\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg, const fs::path& samples_path,
                const std::optional<fs::path>& future_x_csv, const fs::path& outdir,
                const std::string& prefix) {
  FitMeta meta;
  std::vector<PosteriorSample> samples;
  read_samples_jsonl(samples_path, meta, samples);

  Mat x_future;
  if (future_x_csv) {
    // rows are in the units of the fitted covariate columns, pre-standardization
    x_future = read_future_x_csv(*future_x_csv);
    for (auto& row : x_future) {
      if (row.size() != meta.p)
        throw DataError("future covariate dimension mismatch: expected " +
                        std::to_string(meta.p));
      for (std::size_t c = 0; c < meta.p; ++c)
        row[c] = (row[c] - meta.x_mean[c]) / meta.x_sd[c];
    }
  } else {
    x_future = meta.future_x;
  }
  if (static_cast<int>(x_future.size()) < cfg.predict_n_ahead)
    throw DataError("missing future covariates: need " + std::to_string(cfg.predict_n_ahead) +
                    " rows, have " + std::to_string(x_future.size()) +
                    " (pass a future-covariate CSV)");

  fs::create_directories(outdir);
  const DensityGrid grid = make_prediction_grid(cfg, meta);
  for (int h = 1; h <= cfg.predict_n_ahead; ++h) {
    long underflow = 0;
    DensityGrid dens = predictive_density(samples, x_future, grid, h, &underflow);
    dens = destandardize_density(dens, meta.y_mean, meta.y_sd);
    std::ostringstream comment;
    comment << "model=" << meta.model << " seed=" << meta.seed << " horizon=" << h
            << " samples=" << samples.size() << " grid_n=" << grid.cells();
    const fs::path out = outdir / (prefix + "_h" + std::to_string(h) + ".csv");
    write_density_csv(out, dens, comment.str());
    std::cout << "predict: h=" << h << " mass=" << dens.mass() << " -> " << out.string()
              << "\n";
  }
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const fs::path& outdir) {
  fs::create_directories(outdir);
  const TrueDesign design = cfg.simulate.design == 1 ? TrueDesign::design1(cfg.simulate.T)
                                                     : TrueDesign::design2(cfg.simulate.T);
  json manifest;
  manifest["design"] = cfg.simulate.design;
  manifest["T"] = cfg.simulate.T;
  manifest["B"] = cfg.simulate.B;
  manifest["n_ahead"] = cfg.simulate.n_ahead;
  manifest["master_seed"] = cfg.seed;
  manifest["replicate_seeds"] = json::array();
  for (int b = 0; b < cfg.simulate.B; ++b)
    manifest["replicate_seeds"].push_back(replicate_seed(cfg.seed, static_cast<std::uint64_t>(b)));
  atomic_write_text(outdir / "manifest.json", manifest.dump(2) + "\n");
  for (int b = 0; b < cfg.simulate.B; ++b) {
    TrueDesign d = design;
    d.n_ahead = cfg.simulate.n_ahead;
    Rng rng(replicate_seed(cfg.seed, static_cast<std::uint64_t>(b)));
    const SimulatedReplicate rep = simulate_nhmm(d, rng);
    const std::string stem = "rep_" + std::to_string(b);

    RawSeries s;
    s.x.assign(d.T, Vec(1));
    s.y.assign(d.T, 0.0);
    for (int t = 0; t < d.T; ++t) {
      s.x[t][0] = rep.x_raw_series[t];
      s.y[t] = rep.y_raw_series[t];
    }
    write_series_csv(outdir / (stem + ".csv"), s);

    Mat fut(d.n_ahead, Vec(1));
    for (int h = 0; h < d.n_ahead; ++h) fut[h][0] = rep.x_raw_series[d.T + h];
    write_future_x_csv(outdir / (stem + "_future_x.csv"), fut, d.T + 1);

    // truth sidecar: true parameters, held-out data, and the exact
    // predictive density on the evaluation grid (original y units)
    double lo, hi;
    if (cfg.grid.lo) {
      lo = *cfg.grid.lo;
      hi = *cfg.grid.hi;
    } else {
      Vec y_fit(rep.y_raw_series.begin(), rep.y_raw_series.begin() + d.T);
      const DensityGrid dflt = default_grid(y_fit, cfg.grid.n);
      lo = dflt.points.front();
      hi = dflt.points.back();
    }
    const DensityGrid grid = DensityGrid::uniform(lo, hi, cfg.grid.n);

    json truth;
    truth["replicate"] = b;
    truth["design"] = cfg.simulate.design;
    truth["seed"] = replicate_seed(cfg.seed, static_cast<std::uint64_t>(b));
    truth["T"] = d.T;
    truth["n_ahead"] = d.n_ahead;
    truth["z_true"] = rep.z_true;
    truth["y_heldout"] = rep.y_heldout;
    truth["x_mean"] = rep.data.x_raw_mean;
    truth["x_sd"] = rep.data.x_raw_sd;
    truth["y_mean"] = rep.data.y_raw_mean;
    truth["y_sd"] = rep.data.y_raw_sd;
    truth["grid"] = {{"lo", lo}, {"hi", hi}, {"n", cfg.grid.n}};
    json tp;
    tp["alpha"] = rep.true_trans.alpha;
    tp["beta"] = rep.true_trans.beta;
    tp["x_star"] = rep.true_trans.x_star;
    truth["true_params"] = tp;
    json densities;
    for (int h = 1; h <= d.n_ahead; ++h) {
      const DensityGrid td = true_predictive_density(rep, grid, h);
      densities[std::to_string(h)] = td.values;
    }
    truth["grid_points"] = grid.points;
    truth["true_density"] = densities;
    atomic_write_text(outdir / (stem + "_truth.json"), truth.dump() + "\n");
  }
  std::cout << "simulate: design " << cfg.simulate.design << ", " << cfg.simulate.B
            << " replicates of T=" << cfg.simulate.T << " -> " << outdir.string() << "\n"
            << manifest.dump(2) << "\n";
  return 0;
}

namespace {

struct TruthFile {
  int replicate = 0;
  int n_ahead = 0;
  DensityGrid grid;                 // points + per-horizon values via densities
  std::map<int, Vec> density_by_h;  // original y units
};

TruthFile read_truth(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path.string());
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw DataError("bad truth JSON: " + path.string());
  TruthFile t;
  t.replicate = j.at("replicate").get<int>();
  t.n_ahead = j.at("n_ahead").get<int>();
  t.grid.points = j.at("grid_points").get<Vec>();
  for (std::size_t i = 1; i < t.grid.points.size(); ++i)
    t.grid.deltas.push_back(t.grid.points[i] - t.grid.points[i - 1]);
  for (auto it = j.at("true_density").begin(); it != j.at("true_density").end(); ++it)
    t.density_by_h[std::stoi(it.key())] = it.value().get<Vec>();
  return t;
}

struct EvalRow {
  std::string model;
  int horizon = 0;
  double mise_est = 0.0, p25 = 0.0, p50 = 0.0;
  int n_replicates = 0;
};

std::vector<EvalRow> evaluate_models(const std::vector<std::string>& models,
                                     const fs::path& estimates_dir,
                                     const fs::path& truth_dir) {
  std::vector<fs::path> truth_files;
  for (const auto& e : fs::directory_iterator(truth_dir))
    if (e.path().filename().string().ends_with("_truth.json"))
      truth_files.push_back(e.path());
  std::sort(truth_files.begin(), truth_files.end());
  if (truth_files.empty())
    throw DataError("no *_truth.json files in " + truth_dir.string());

  // ise[model][horizon] -> per-replicate integrated squared errors
  std::map<std::string, std::map<int, Vec>> ise;
  for (const fs::path& tf : truth_files) {
    const TruthFile truth = read_truth(tf);
    for (const std::string& model : models) {
      for (int h = 1; h <= truth.n_ahead; ++h) {
        const fs::path est_path = estimates_dir / (model + "_rep_" +
                                                   std::to_string(truth.replicate) + "_h" +
                                                   std::to_string(h) + ".csv");
        if (!fs::exists(est_path))
          throw DataError("missing estimate file: " + est_path.string());
        const DensityGrid est = read_density_csv(est_path);
        DensityGrid tg = truth.grid;
        tg.values = truth.density_by_h.at(h);
        ise[model][h].push_back(mise(tg, est));
      }
    }
  }
  std::vector<EvalRow> rows;
  for (const std::string& model : models) {
    for (auto& [h, errs] : ise[model]) {
      EvalRow r;
      r.model = model;
      r.horizon = h;
      r.n_replicates = static_cast<int>(errs.size());
      for (double e : errs) r.mise_est += e;
      r.mise_est /= errs.size();
      r.p25 = percentile(errs, 25.0);
      r.p50 = percentile(errs, 50.0);
      rows.push_back(r);
    }
  }
  return rows;
}

std::string report_csv(const std::vector<EvalRow>& rows) {
  std::ostringstream os;
  os << "model,horizon,n_replicates,mise,ise_p25,ise_p50\n";
  for (const EvalRow& r : rows)
    os << r.model << "," << r.horizon << "," << r.n_replicates << ","
       << format_double(r.mise_est) << "," << format_double(r.p25) << ","
       << format_double(r.p50) << "\n";
  return os.str();
}

std::string report_table(const std::vector<EvalRow>& rows) {
  std::ostringstream os;
  os << "model     horizon  n    MISE        ISE p25     ISE p50\n";
  for (const EvalRow& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-9s %-8d %-4d %-11.5g %-11.5g %-11.5g\n",
                  r.model.c_str(), r.horizon, r.n_replicates, r.mise_est, r.p25, r.p50);
    os << buf;
  }
  return os.str();
}

std::vector<std::string> detect_models(const fs::path& estimates_dir) {
  std::set<std::string> models;
  for (const auto& e : fs::directory_iterator(estimates_dir)) {
    const std::string name = e.path().filename().string();
    const auto pos = name.find("_rep_");
    if (pos != std::string::npos && name.ends_with(".csv"))
      models.insert(name.substr(0, pos));
  }
  if (models.empty())
    throw DataError("no <model>_rep_<b>_h<h>.csv estimates in " + estimates_dir.string());
  return {models.begin(), models.end()};
}

}  // namespace

int cmd_evaluate(const RunConfig& cfg, const fs::path& estimates_dir, const fs::path& truth_dir,
                 const fs::path& report_out) {
  (void)cfg;
  const std::vector<EvalRow> rows =
      evaluate_models(detect_models(estimates_dir), estimates_dir, truth_dir);
  atomic_write_text(report_out, report_csv(rows));
  std::cout << report_table(rows);
  std::cout << "evaluate: report -> " << report_out.string() << "\n";
  return 0;
}

int cmd_replicate(const RunConfig& cfg, const fs::path& outdir) {
  const std::string main_model = cfg.model;
  const std::string base_model = baseline_of(main_model);
  const fs::path data_dir = outdir / "data";
  const fs::path fits_dir = outdir / "fits";
  const fs::path pred_dir = outdir / "predictions";
  fs::create_directories(fits_dir);
  fs::create_directories(pred_dir);

  cmd_simulate(cfg, data_dir);

  RunConfig common = cfg;
  common.predict_n_ahead = cfg.simulate.n_ahead;
  const std::vector<std::string> models = {main_model, base_model};

  parallel_for(cfg.simulate.B * 2, [&](int job) {
    const int b = job / 2;
    const std::string model = models[job % 2];
    RunConfig rc = common;
    rc.model = model;
    // distinct fit seeds per (replicate, model), separated from the
    // simulation seed stream
    rc.seed = replicate_seed(cfg.seed ^ 0x9e3779b97f4a7c15ULL,
                             static_cast<std::uint64_t>(job));
    const std::string stem = "rep_" + std::to_string(b);
    // reuse the truth sidecar's grid so estimates line up with the truth
    const TruthFile truth = read_truth(data_dir / (stem + "_truth.json"));
    rc.grid.lo = truth.grid.points.front();
    rc.grid.hi = truth.grid.points.back();
    rc.grid.n = static_cast<int>(truth.grid.points.size()) - 1;

    const fs::path samples = fits_dir / (model + "_" + stem + ".jsonl");
    const fs::path diag = fits_dir / (model + "_" + stem + "_diag.json");
    cmd_fit(rc, data_dir / (stem + ".csv"), samples, diag);
    cmd_predict(rc, samples, data_dir / (stem + "_future_x.csv"), pred_dir,
                model + "_" + stem);
  });

  RunConfig eval_cfg = cfg;
  return cmd_evaluate(eval_cfg, pred_dir, data_dir, outdir / "report.csv");
}

}  // namespace nhmm
