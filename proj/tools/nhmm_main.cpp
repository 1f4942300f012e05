#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nhmm/commands.hpp"

namespace {

nhmm::RunConfig load_config(const std::string& config_path) {
  if (config_path.empty()) return nhmm::RunConfig{};
  return nhmm::RunConfig::from_json_file(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian nonparametric non-homogeneous HMM: simulation, MCMC fitting, "
               "multi-step predictive densities, and density-estimation scoring"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON config file")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate synthetic replicates with truth sidecars");
  std::string sim_out = "sim_out";
  sim->add_option("-o,--out", sim_out, "output directory")->capture_default_str();

  // fit
  auto* fit = app.add_subcommand("fit", "Run the MCMC sampler on a t,x1..xp,y CSV");
  std::string fit_data, fit_samples = "samples.jsonl", fit_diag = "diagnostics.json";
  fit->add_option("data", fit_data, "input series CSV")->required();
  fit->add_option("-s,--samples", fit_samples, "posterior samples JSONL output")
      ->capture_default_str();
  fit->add_option("-d,--diagnostics", fit_diag, "diagnostics JSON output")
      ->capture_default_str();

  // predict
  auto* pred = app.add_subcommand("predict", "Multi-step predictive densities from samples");
  std::string pred_samples, pred_future, pred_out = ".", pred_prefix = "density";
  pred->add_option("samples", pred_samples, "posterior samples JSONL")->required();
  pred->add_option("-f,--future-x", pred_future, "future covariate CSV (t,x1..xp)");
  pred->add_option("-o,--out", pred_out, "output directory")->capture_default_str();
  pred->add_option("-p,--prefix", pred_prefix, "output filename prefix")
      ->capture_default_str();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score density estimates against simulation truth");
  std::string ev_est, ev_truth, ev_report = "report.csv";
  ev->add_option("estimates", ev_est, "directory of <model>_rep_<b>_h<h>.csv estimates")
      ->required();
  ev->add_option("truth", ev_truth, "directory of *_truth.json sidecars")->required();
  ev->add_option("-o,--report", ev_report, "report CSV output")->capture_default_str();

  // replicate
  auto* rep = app.add_subcommand(
      "replicate", "Full study: simulate, fit model + homogeneous baseline, predict, score");
  std::string rep_out = "study_out";
  rep->add_option("-o,--out", rep_out, "output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    const nhmm::RunConfig cfg = load_config(config_path);
    if (sim->parsed()) return nhmm::cmd_simulate(cfg, sim_out);
    if (fit->parsed()) return nhmm::cmd_fit(cfg, fit_data, fit_samples, fit_diag);
    if (pred->parsed()) {
      std::optional<std::filesystem::path> future;
      if (!pred_future.empty()) future = pred_future;
      return nhmm::cmd_predict(cfg, pred_samples, future, pred_out, pred_prefix);
    }
    if (ev->parsed()) return nhmm::cmd_evaluate(cfg, ev_est, ev_truth, ev_report);
    if (rep->parsed()) return nhmm::cmd_replicate(cfg, rep_out);
  } catch (const nhmm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nhmm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const nhmm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
