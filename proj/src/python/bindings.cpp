#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nhmm/commands.hpp"

namespace py = pybind11;
using namespace nhmm;

namespace {

// Fit result kept on the C++ side: posterior samples plus the metadata
// needed for prediction and destandardization.
struct FitResult {
  FitMeta meta;
  std::vector<PosteriorSample> samples;
  RunDiagnostics diag;
};

FitResult fit_arrays(const Mat& x, const Vec& y, const std::string& config_json) {
  RunConfig cfg = RunConfig::from_json_text(config_json);
  RawSeries raw{x, y};
  if (raw.x.size() != raw.y.size())
    throw DataError("x and y must have the same length");
  FitResult out;
  const Dataset data = prepare_dataset(raw, cfg, out.meta);
  ModelSpec spec = cfg.make_spec();
  resolve_hyperpriors(spec, data);
  Rng rng(cfg.seed);
  out.samples = run_mcmc(data, spec, cfg.make_mcmc(), rng, &out.diag);
  return out;
}

py::dict predict_arrays(const FitResult& fit, const Mat& x_future_raw, int n_ahead,
                        int grid_n, std::optional<double> lo, std::optional<double> hi) {
  Mat xf = x_future_raw;
  for (auto& row : xf) {
    if (row.size() != fit.meta.p) throw DataError("future covariate dimension mismatch");
    for (std::size_t c = 0; c < fit.meta.p; ++c)
      row[c] = (row[c] - fit.meta.x_mean[c]) / fit.meta.x_sd[c];
  }
  double glo, ghi;
  if (lo && hi) {
    glo = (*lo - fit.meta.y_mean) / fit.meta.y_sd;
    ghi = (*hi - fit.meta.y_mean) / fit.meta.y_sd;
  } else {
    glo = fit.meta.y_min_std - 3.0 * fit.meta.y_sd_std;
    ghi = fit.meta.y_max_std + 3.0 * fit.meta.y_sd_std;
  }
  const DensityGrid grid = DensityGrid::uniform(glo, ghi, grid_n);
  DensityGrid dens = predictive_density(fit.samples, xf, grid, n_ahead);
  dens = destandardize_density(dens, fit.meta.y_mean, fit.meta.y_sd);
  py::dict d;
  d["points"] = dens.points;
  d["values"] = dens.values;
  d["mass"] = dens.mass();
  return d;
}

py::dict simulate_py(int design, int T, int n_ahead, std::uint64_t seed) {
  TrueDesign d = design == 1 ? TrueDesign::design1(T) : TrueDesign::design2(T);
  if (design != 1 && design != 2) throw ConfigError("design must be 1 or 2");
  d.n_ahead = n_ahead;
  Rng rng(seed);
  const SimulatedReplicate rep = simulate_nhmm(d, rng);
  py::dict out;
  out["x"] = rep.x_raw_series;
  out["y"] = rep.y_raw_series;
  out["z_true"] = rep.z_true;
  out["y_heldout"] = rep.y_heldout;
  out["T"] = d.T;
  out["n_ahead"] = d.n_ahead;
  return out;
}

py::dict diagnostics_dict(const FitResult& f) {
  py::dict d;
  d["K_trace"] = f.diag.K_trace;
  d["underflow_count"] = f.diag.underflow_count;
  d["seconds"] = f.diag.seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_nhmm, m) {
  m.doc() = "Bayesian nonparametric non-homogeneous HMM: MCMC fitting and "
            "multi-step predictive densities";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericalError>(m, "NumericalError");

  py::class_<FitResult>(m, "FitResult")
      .def_property_readonly("n_samples",
                             [](const FitResult& f) { return f.samples.size(); })
      .def_property_readonly("K",
                             [](const FitResult& f) {
                               std::vector<int> k;
                               for (const auto& s : f.samples) k.push_back(s.K);
                               return k;
                             })
      .def_property_readonly("z",
                             [](const FitResult& f) {
                               std::vector<std::vector<int>> z;
                               for (const auto& s : f.samples) z.push_back(s.z);
                               return z;
                             })
      .def_property_readonly("diagnostics", &diagnostics_dict)
      .def("save", [](const FitResult& f, const std::filesystem::path& path) {
        write_samples_jsonl(path, f.meta, f.samples);
      });

  m.def("fit", &fit_arrays, py::arg("x"), py::arg("y"), py::arg("config") = "{}",
        "Run the MCMC sampler on covariates x (T rows) and responses y.");
  m.def("load_fit", [](const std::filesystem::path& path) {
    FitResult f;
    read_samples_jsonl(path, f.meta, f.samples);
    return f;
  });
  m.def("predict", &predict_arrays, py::arg("fit"), py::arg("x_future"),
        py::arg("n_ahead") = 1, py::arg("grid_n") = 512,
        py::arg("lo") = std::nullopt, py::arg("hi") = std::nullopt,
        "Posterior predictive density n_ahead steps ahead, original y units.");
  m.def("simulate", &simulate_py, py::arg("design") = 1, py::arg("T") = 250,
        py::arg("n_ahead") = 3, py::arg("seed") = 1,
        "One synthetic replicate from the simulation designs.");

  // path-level pipeline entry points, mirroring the CLI subcommands
  m.def("cmd_fit",
        [](const std::string& config, const std::filesystem::path& data,
           const std::filesystem::path& samples, const std::filesystem::path& diag) {
          return cmd_fit(RunConfig::from_json_text(config), data, samples, diag);
        });
  m.def("cmd_predict",
        [](const std::string& config, const std::filesystem::path& samples,
           std::optional<std::filesystem::path> future_x,
           const std::filesystem::path& outdir, const std::string& prefix) {
          return cmd_predict(RunConfig::from_json_text(config), samples, future_x, outdir,
                             prefix);
        });
  m.def("cmd_simulate", [](const std::string& config, const std::filesystem::path& outdir) {
    return cmd_simulate(RunConfig::from_json_text(config), outdir);
  });
  m.def("cmd_evaluate",
        [](const std::string& config, const std::filesystem::path& estimates,
           const std::filesystem::path& truth, const std::filesystem::path& report) {
          return cmd_evaluate(RunConfig::from_json_text(config), estimates, truth, report);
        });
  m.def("cmd_replicate", [](const std::string& config, const std::filesystem::path& outdir) {
    return cmd_replicate(RunConfig::from_json_text(config), outdir);
  });
}
