#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nhmm/prediction.hpp"

namespace nhmm {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raw time-series table from a `t,x1..xp,y` CSV, original units.
struct RawSeries {
  Mat x;  // T rows, p columns
  Vec y;  // T rows
};

RawSeries read_series_csv(const std::filesystem::path& path);
void write_series_csv(const std::filesystem::path& path, const RawSeries& s);

// Future covariate rows: `t,x1..xp` CSV.
Mat read_future_x_csv(const std::filesystem::path& path);
void write_future_x_csv(const std::filesystem::path& path, const Mat& x, int t_start);

// Fit metadata carried alongside posterior samples: model choice,
// standardization constants, derived future covariates, and the seed.
struct FitMeta {
  std::string model;  // inhmm1 | inhmm2 | ihmmp1 | ihmmp2
  std::uint64_t seed = 0;
  std::size_t T = 0;
  std::size_t p = 1;
  Vec x_mean, x_sd;
  double y_mean = 0.0;
  double y_sd = 1.0;
  Mat future_x;  // standardized units; may be empty
  bool per_state_sigma = false;
  // response range and spread in model (standardized) units, for the
  // default prediction grid
  double y_min_std = -1.0;
  double y_max_std = 1.0;
  double y_sd_std = 1.0;
};

// Posterior samples as newline-delimited JSON, one record per retained
// iteration, preceded by a single meta record.
void write_samples_jsonl(const std::filesystem::path& path, const FitMeta& meta,
                         const std::vector<PosteriorSample>& samples);
void read_samples_jsonl(const std::filesystem::path& path, FitMeta& meta,
                        std::vector<PosteriorSample>& samples);

// Two-column density CSV with a `#`-prefixed metadata header.
void write_density_csv(const std::filesystem::path& path, const DensityGrid& grid,
                       const std::string& header_comment);
DensityGrid read_density_csv(const std::filesystem::path& path);

// Write-temp-then-rename text output.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

// Fixed round-trippable formatting used by every writer.
std::string format_double(double v);

ModelVariant variant_of(const std::string& model);
bool is_homogeneous(const std::string& model);

}  // namespace nhmm
