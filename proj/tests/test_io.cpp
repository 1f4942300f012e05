#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <json.hpp>

#include "nhmm/commands.hpp"

using namespace nhmm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("nhmm_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("series CSV round trip and parse errors") {
  TempDir tmp;
  RawSeries s;
  s.x = {{0.25}, {1.0 / 3.0}, {-2.75}};
  s.y = {1.5, -0.125, 7.0};
  const fs::path p = tmp.path / "series.csv";
  write_series_csv(p, s);
  const RawSeries r = read_series_csv(p);
  CHECK(r.x == s.x);
  CHECK(r.y == s.y);

  const fs::path bad = tmp.path / "bad.csv";
  std::ofstream(bad) << "t,x1,y\n1,0.5,oops\n";
  CHECK_THROWS_WITH_AS(read_series_csv(bad), doctest::Contains("row 2"), DataError);
  const fs::path badh = tmp.path / "badh.csv";
  std::ofstream(badh) << "a,b,c\n";
  CHECK_THROWS_AS(read_series_csv(badh), DataError);
  CHECK_THROWS_AS(read_series_csv(tmp.path / "missing.csv"), DataError);
}

TEST_CASE("samples JSONL round trip preserves every field") {
  TempDir tmp;
  FitMeta meta;
  meta.model = "inhmm2";
  meta.seed = 123;
  meta.T = 4;
  meta.p = 1;
  meta.x_mean = {0.5};
  meta.x_sd = {2.0};
  meta.y_mean = 1.0;
  meta.y_sd = 3.0;
  meta.future_x = {{0.1}, {0.2}};
  meta.per_state_sigma = true;
  meta.y_min_std = -2.5;
  meta.y_max_std = 2.5;
  meta.y_sd_std = 1.0;

  PosteriorSample s;
  s.iter = 7;
  s.z = {1, 2, 1, 2};
  s.K = 2;
  s.alpha = {{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}};
  s.beta = {1.5, 0.75};
  s.x_star = {{0.0}, {1.0}};
  s.emit.variant = ModelVariant::iNHMM2;
  s.emit.eta = {{1.0, 2.0}, {0.0, -1.0}};
  s.emit.global_sigma = false;
  s.emit.sigma2_y = {0.5, 0.25};

  const fs::path p = tmp.path / "samples.jsonl";
  write_samples_jsonl(p, meta, {s});
  FitMeta m2;
  std::vector<PosteriorSample> out;
  read_samples_jsonl(p, m2, out);
  CHECK(m2.model == meta.model);
  CHECK(m2.seed == meta.seed);
  CHECK(m2.x_mean == meta.x_mean);
  CHECK(m2.future_x == meta.future_x);
  CHECK(m2.per_state_sigma == meta.per_state_sigma);
  CHECK(m2.y_min_std == meta.y_min_std);
  REQUIRE(out.size() == 1);
  CHECK(out[0].iter == s.iter);
  CHECK(out[0].z == s.z);
  CHECK(out[0].alpha == s.alpha);
  CHECK(out[0].beta == s.beta);
  CHECK(out[0].x_star == s.x_star);
  CHECK(out[0].emit.eta == s.emit.eta);
  CHECK(out[0].emit.sigma2_y == s.emit.sigma2_y);
  CHECK(out[0].emit.global_sigma == false);
}

TEST_CASE("density CSV round trip") {
  TempDir tmp;
  DensityGrid g = DensityGrid::uniform(-1.0, 1.0, 8);
  for (std::size_t i = 0; i < g.cells(); ++i) g.values[i] = 0.1 * (i + 1);
  const fs::path p = tmp.path / "density.csv";
  write_density_csv(p, g, "model=test seed=1");
  const DensityGrid r = read_density_csv(p);
  REQUIRE(r.cells() == g.cells());
  for (std::size_t i = 0; i <= g.cells(); ++i)
    CHECK(r.points[i] == doctest::Approx(g.points[i]).epsilon(1e-15));
  for (std::size_t i = 0; i < g.cells(); ++i) CHECK(r.values[i] == g.values[i]);
  CHECK(slurp(p).rfind("# model=test", 0) == 0);
}

TEST_CASE("run config: parsing, defaults, and validation errors") {
  const RunConfig dflt = RunConfig::from_json_text("{}");
  CHECK(dflt.model == "inhmm1");
  CHECK(dflt.slice_kappa == 0.5);
  CHECK(dflt.mcmc.n_iter == 10000);

  const RunConfig cfg = RunConfig::from_json_text(R"({
    "model": "ihmmp2", "seed": 9,
    "mcmc": {"n_iter": 100, "n_burnin": 10, "thin": 2, "init": "single"},
    "hyper": {"mu_alpha": 1.0, "sigma2_prior_mean": 0.5, "sigma2_prior_sd": 0.25},
    "grid": {"n": 64, "lo": -3.0, "hi": 3.0},
    "preprocess": {"accumulate_window": 5, "forward_lag": 2}
  })");
  CHECK(cfg.model == "ihmmp2");
  CHECK(cfg.mcmc.init == InitMode::SingleState);
  CHECK(cfg.mu_alpha == 1.0);
  CHECK(*cfg.grid.lo == -3.0);
  const ModelSpec spec = cfg.make_spec();
  CHECK(spec.variant == ModelVariant::iNHMM2);
  CHECK(spec.homogeneous);
  // moment-matched inverse gamma: mean 0.5, sd 0.25 -> shape 6, scale 2.5
  CHECK(spec.hyper.ig_shape == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(spec.hyper.ig_scale == doctest::Approx(2.5).epsilon(1e-12));

  CHECK_THROWS_AS(RunConfig::from_json_text("not json"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"model": "bogus"})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"slice_kappa": 1.5})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"unknown_key": 1})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json_text(R"({"grid": {"lo": 0.0}})"), ConfigError);
  CHECK_THROWS_AS(
      RunConfig::from_json_text(R"({"mcmc": {"n_iter": 5, "n_burnin": 10}})"),
      ConfigError);
}

TEST_CASE("accumulated predictor: rolling sum, lag, seasonal fill") {
  // 24 months of raw values 1..24; window 5, lag 2
  Vec raw(24);
  for (int t = 0; t < 24; ++t) raw[t] = t + 1.0;
  Vec pred, fut;
  accumulated_predictor(raw, 5, 2, 12, 3, pred, fut);
  REQUIRE(pred.size() == 24);
  REQUIRE(fut.size() == 3);
  // first computable index (0-based): t = 6 -> sum raw[0..4] = 15
  CHECK(pred[6] == 15.0);
  CHECK(pred[7] == 20.0);
  CHECK(pred[23] == doctest::Approx(raw[17] + raw[18] + raw[19] + raw[20] + raw[21]));
  // rows before t=6 are filled with the seasonal mean of computed values:
  // position t has exactly one computed partner at t + 12
  for (int t = 0; t < 6; ++t) CHECK(pred[t] == pred[t + 12]);
  // future values only need raw months <= 24 here (t=24: raw[18..22])
  CHECK(fut[0] == doctest::Approx(raw[18] + raw[19] + raw[20] + raw[21] + raw[22]));

  CHECK_THROWS_AS(accumulated_predictor(Vec(4, 1.0), 5, 2, 12, 1, pred, fut), DataError);
}

TEST_CASE("accumulated predictor matches a hand-rolled 231-row oracle") {
  // monthly series like the application data: 231 rows, window 5, lag 2
  Rng rng(77);
  Vec raw(231);
  for (auto& v : raw) v = 10.0 + 5.0 * rng.uniform();
  Vec pred, fut;
  accumulated_predictor(raw, 5, 2, 12, 2, pred, fut);
  // hand-computed rolling sum shifted by the lag, first 12 computable rows
  for (int t = 6; t < 18; ++t) {
    double s = 0.0;
    for (int i = t - 6; i <= t - 2; ++i) s += raw[i];
    CHECK(pred[t] == doctest::Approx(s).epsilon(1e-14));
  }
  // early rows: across-years monthly mean of the computed predictor
  for (int t = 0; t < 6; ++t) {
    double s = 0.0;
    int n = 0;
    for (int u = t; u < 231; u += 12)
      if (u >= 6) {
        double v = 0.0;
        for (int i = u - 6; i <= u - 2; ++i) v += raw[i];
        s += v;
        ++n;
      }
    CHECK(pred[t] == doctest::Approx(s / n).epsilon(1e-12));
  }
}

TEST_CASE("prepare_dataset: standardization modes and meta") {
  RunConfig cfg;
  cfg.model = "inhmm2";
  RawSeries raw;
  for (int t = 0; t < 20; ++t) {
    raw.x.push_back({static_cast<double>(t)});
    raw.y.push_back(3.0 * t + 1.0);
  }
  FitMeta meta;
  const Dataset d = prepare_dataset(raw, cfg, meta);
  // inhmm2 standardizes y by default
  double my = 0.0;
  for (double v : d.y) my += v;
  CHECK(std::fabs(my) < 1e-10);
  CHECK(meta.y_sd > 0.0);
  CHECK(meta.x_mean[0] == doctest::Approx(9.5));
  CHECK(meta.y_sd_std == doctest::Approx(1.0).epsilon(1e-12));

  cfg.model = "inhmm1";
  FitMeta meta1;
  const Dataset d1 = prepare_dataset(raw, cfg, meta1);
  CHECK(meta1.y_mean == 0.0);  // inhmm1 leaves y unstandardized by default
  CHECK(meta1.y_sd == 1.0);
  CHECK(d1.y == raw.y);

  cfg.preprocess.standardize_y = true;
  FitMeta meta2;
  const Dataset d2 = prepare_dataset(raw, cfg, meta2);
  CHECK(meta2.y_sd > 1.0);  // override forces standardization
  (void)d2;
}

TEST_CASE("atomic write and fixed float formatting") {
  TempDir tmp;
  const fs::path p = tmp.path / "out.txt";
  atomic_write_text(p, "hello\n");
  CHECK(slurp(p) == "hello\n");
  CHECK(!fs::exists(tmp.path / "out.txt.tmp"));
  // %.17g round-trips doubles exactly
  const double v = 0.1234567890123456789;
  CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(2.0) == "2");
}

TEST_CASE("evaluate: hand-set ISEs give MISE 0.2, median 0.2, p25 0.15") {
  // build two replicates whose estimate differs from truth by a constant c on
  // a unit-length grid: ISE = c^2 * total length
  TempDir tmp;
  const fs::path truth_dir = tmp.path / "truth";
  const fs::path est_dir = tmp.path / "est";
  fs::create_directories(truth_dir);
  fs::create_directories(est_dir);

  const int n_cells = 10;
  const DensityGrid base = DensityGrid::uniform(0.0, 1.0, n_cells);
  const Vec ise_targets{0.1, 0.3};
  for (int b = 0; b < 2; ++b) {
    nlohmann::json truth;
    truth["replicate"] = b;
    truth["n_ahead"] = 1;
    truth["grid_points"] = base.points;
    truth["true_density"]["1"] = Vec(n_cells, 0.0);
    atomic_write_text(truth_dir / ("rep_" + std::to_string(b) + "_truth.json"),
                      truth.dump());
    DensityGrid est = base;
    est.values.assign(n_cells, std::sqrt(ise_targets[b]));  // ISE = c^2 * 1
    write_density_csv(est_dir / ("m_rep_" + std::to_string(b) + "_h1.csv"), est, "t");
  }
  RunConfig cfg;
  const fs::path report = tmp.path / "report.csv";
  CHECK(cmd_evaluate(cfg, est_dir, truth_dir, report) == 0);
  {
    // MISE 0.2, p25 0.15, median 0.2
    std::ifstream is(report);
    std::string line;
    std::getline(is, line);  // header
    std::getline(is, line);
    double mise_v = 0.0, p25 = 0.0, p50 = 0.0;
    char model_c = 0;
    int horizon = 0, n = 0;
    REQUIRE(std::sscanf(line.c_str(), "%c,%d,%d,%lf,%lf,%lf", &model_c, &horizon, &n,
                        &mise_v, &p25, &p50) == 6);
    CHECK(mise_v == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(p25 == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(p50 == doctest::Approx(0.2).epsilon(1e-12));
  }

  // est == truth gives exact zeros
  for (int b = 0; b < 2; ++b) {
    DensityGrid est = base;
    est.values.assign(n_cells, 0.0);
    write_density_csv(est_dir / ("m_rep_" + std::to_string(b) + "_h1.csv"), est, "t");
  }
  CHECK(cmd_evaluate(cfg, est_dir, truth_dir, report) == 0);
  CHECK(slurp(report).find("m,1,2,0,0,0") != std::string::npos);

  // missing estimate file is a data error naming the pair
  fs::remove(est_dir / "m_rep_1_h1.csv");
  CHECK_THROWS_WITH_AS(cmd_evaluate(cfg, est_dir, truth_dir, report),
                       doctest::Contains("m_rep_1_h1.csv"), DataError);
}

TEST_CASE("cmd_fit writes the requested number of records; baseline pins beta") {
  TempDir tmp;
  // small simulated dataset on disk
  RunConfig sim_cfg;
  sim_cfg.seed = 21;
  sim_cfg.simulate = {1, 60, 1, 2};
  sim_cfg.grid.n = 32;
  cmd_simulate(sim_cfg, tmp.path / "data");

  RunConfig cfg;
  cfg.model = "ihmmp1";
  cfg.seed = 4;
  cfg.mcmc.n_iter = 10;
  cfg.mcmc.n_burnin = 0;
  cfg.mcmc.thin = 1;
  const fs::path samples = tmp.path / "s.jsonl";
  CHECK(cmd_fit(cfg, tmp.path / "data" / "rep_0.csv", samples, tmp.path / "d.json") == 0);
  FitMeta meta;
  std::vector<PosteriorSample> out;
  read_samples_jsonl(samples, meta, out);
  CHECK(out.size() == 10);
  for (const auto& s : out)
    for (double b : s.beta) CHECK(b == 0.0);
  CHECK(meta.model == "ihmmp1");
}

TEST_CASE("cmd_predict: three horizons, unit mass, missing-covariate error") {
  TempDir tmp;
  RunConfig sim_cfg;
  sim_cfg.seed = 22;
  sim_cfg.simulate = {1, 80, 1, 3};
  cmd_simulate(sim_cfg, tmp.path / "data");

  RunConfig cfg;
  cfg.model = "inhmm1";
  cfg.seed = 5;
  cfg.mcmc.n_iter = 60;
  cfg.mcmc.n_burnin = 20;
  cfg.mcmc.thin = 2;
  cfg.predict_n_ahead = 3;
  cfg.grid.n = 200;
  const fs::path samples = tmp.path / "s.jsonl";
  cmd_fit(cfg, tmp.path / "data" / "rep_0.csv", samples, tmp.path / "d.json");
  CHECK(cmd_predict(cfg, samples, tmp.path / "data" / "rep_0_future_x.csv",
                    tmp.path / "pred", "density") == 0);
  for (int h = 1; h <= 3; ++h) {
    const DensityGrid g =
        read_density_csv(tmp.path / "pred" / ("density_h" + std::to_string(h) + ".csv"));
    CHECK(g.mass() == doctest::Approx(1.0).epsilon(0.01));
  }
  // no future covariates available and none supplied: explicit error
  CHECK_THROWS_WITH_AS(cmd_predict(cfg, samples, std::nullopt, tmp.path / "pred", "x"),
                       doctest::Contains("future covariates"), DataError);
}

TEST_CASE("determinism: rerunning commands yields byte-identical files") {
  TempDir tmp;
  RunConfig cfg;
  cfg.seed = 31;
  cfg.simulate = {2, 50, 2, 2};
  cfg.mcmc.n_iter = 30;
  cfg.mcmc.n_burnin = 10;
  cfg.model = "inhmm2";
  cfg.predict_n_ahead = 2;
  cfg.grid.n = 64;

  cmd_simulate(cfg, tmp.path / "a");
  cmd_simulate(cfg, tmp.path / "b");
  for (const auto& e : fs::directory_iterator(tmp.path / "a"))
    CHECK(slurp(e.path()) == slurp(tmp.path / "b" / e.path().filename()));

  cmd_fit(cfg, tmp.path / "a" / "rep_0.csv", tmp.path / "s1.jsonl", tmp.path / "d1.json");
  cmd_fit(cfg, tmp.path / "a" / "rep_0.csv", tmp.path / "s2.jsonl", tmp.path / "d2.json");
  CHECK(slurp(tmp.path / "s1.jsonl") == slurp(tmp.path / "s2.jsonl"));

  cmd_predict(cfg, tmp.path / "s1.jsonl", tmp.path / "a" / "rep_0_future_x.csv",
              tmp.path / "p1", "d");
  cmd_predict(cfg, tmp.path / "s2.jsonl", tmp.path / "a" / "rep_0_future_x.csv",
              tmp.path / "p2", "d");
  for (int h = 1; h <= 2; ++h)
    CHECK(slurp(tmp.path / "p1" / ("d_h" + std::to_string(h) + ".csv")) ==
          slurp(tmp.path / "p2" / ("d_h" + std::to_string(h) + ".csv")));
}
