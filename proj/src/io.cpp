#include "nhmm/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nhmm {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + tmp.string());
    os << content;
    if (!os) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t row) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("parse error at row " + std::to_string(row) + ": '" + s + "'");
  }
}

}  // namespace

RawSeries read_series_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty CSV: " + path.string());
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header.front() != "t" || header.back() != "y")
    throw DataError("expected header t,x1..xp,y in " + path.string());
  const std::size_t p = header.size() - 2;
  RawSeries s;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("parse error at row " + std::to_string(row) + ": wrong column count");
    Vec xr(p);
    for (std::size_t c = 0; c < p; ++c) xr[c] = parse_double(cells[c + 1], row);
    s.x.push_back(std::move(xr));
    s.y.push_back(parse_double(cells.back(), row));
  }
  if (s.y.empty()) throw DataError("no data rows in " + path.string());
  return s;
}

void write_series_csv(const std::filesystem::path& path, const RawSeries& s) {
  std::ostringstream os;
  const std::size_t p = s.x.empty() ? 1 : s.x.front().size();
  os << "t";
  for (std::size_t c = 1; c <= p; ++c) os << ",x" << c;
  os << ",y\n";
  for (std::size_t t = 0; t < s.y.size(); ++t) {
    os << (t + 1);
    for (std::size_t c = 0; c < p; ++c) os << "," << format_double(s.x[t][c]);
    os << "," << format_double(s.y[t]) << "\n";
  }
  atomic_write_text(path, os.str());
}

Mat read_future_x_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty CSV: " + path.string());
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.front() != "t")
    throw DataError("expected header t,x1..xp in " + path.string());
  const std::size_t p = header.size() - 1;
  Mat x;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("parse error at row " + std::to_string(row) + ": wrong column count");
    Vec xr(p);
    for (std::size_t c = 0; c < p; ++c) xr[c] = parse_double(cells[c + 1], row);
    x.push_back(std::move(xr));
  }
  return x;
}

void write_future_x_csv(const std::filesystem::path& path, const Mat& x, int t_start) {
  std::ostringstream os;
  const std::size_t p = x.empty() ? 1 : x.front().size();
  os << "t";
  for (std::size_t c = 1; c <= p; ++c) os << ",x" << c;
  os << "\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    os << (t_start + static_cast<int>(i));
    for (std::size_t c = 0; c < p; ++c) os << "," << format_double(x[i][c]);
    os << "\n";
  }
  atomic_write_text(path, os.str());
}

ModelVariant variant_of(const std::string& model) {
  if (model == "inhmm1" || model == "ihmmp1") return ModelVariant::iNHMM1;
  if (model == "inhmm2" || model == "ihmmp2") return ModelVariant::iNHMM2;
  throw ConfigError("unknown model: " + model);
}

bool is_homogeneous(const std::string& model) {
  return model == "ihmmp1" || model == "ihmmp2";
}

namespace {

json emission_to_json(const EmissionParams& e) {
  json j;
  if (e.variant == ModelVariant::iNHMM1) {
    j["variant"] = "inhmm1";
    j["mu_y"] = e.mu_y;
    j["sigma2_y"] = e.sigma2_y;
  } else {
    j["variant"] = "inhmm2";
    j["eta"] = e.eta;
    if (e.global_sigma) {
      j["sigma2_global"] = e.sigma2_global;
    } else {
      j["sigma2_y"] = e.sigma2_y;
    }
  }
  return j;
}

EmissionParams emission_from_json(const json& j) {
  EmissionParams e;
  if (j.at("variant") == "inhmm1") {
    e.variant = ModelVariant::iNHMM1;
    e.mu_y = j.at("mu_y").get<Vec>();
    e.sigma2_y = j.at("sigma2_y").get<Vec>();
  } else {
    e.variant = ModelVariant::iNHMM2;
    e.eta = j.at("eta").get<Mat>();
    if (j.contains("sigma2_global")) {
      e.global_sigma = true;
      e.sigma2_global = j.at("sigma2_global").get<double>();
    } else {
      e.global_sigma = false;
      e.sigma2_y = j.at("sigma2_y").get<Vec>();
    }
  }
  return e;
}

}  // namespace

void write_samples_jsonl(const std::filesystem::path& path, const FitMeta& meta,
                         const std::vector<PosteriorSample>& samples) {
  std::ostringstream os;
  json m;
  m["meta"] = {{"model", meta.model},       {"seed", meta.seed},
               {"T", meta.T},               {"p", meta.p},
               {"x_mean", meta.x_mean},     {"x_sd", meta.x_sd},
               {"y_mean", meta.y_mean},     {"y_sd", meta.y_sd},
               {"future_x", meta.future_x}, {"per_state_sigma", meta.per_state_sigma},
               {"y_min_std", meta.y_min_std}, {"y_max_std", meta.y_max_std},
               {"y_sd_std", meta.y_sd_std}};
  os << m.dump() << "\n";
  for (const PosteriorSample& s : samples) {
    json j;
    j["iter"] = s.iter;
    j["z"] = s.z;
    j["K"] = s.K;
    j["alpha"] = {{"rows", s.K + 1}, {"data", json::array()}};
    auto& data = j["alpha"]["data"];
    for (const auto& row : s.alpha)
      for (double v : row) data.push_back(v);
    j["beta"] = s.beta;
    j["x_star"] = s.x_star;
    j["emission"] = emission_to_json(s.emit);
    os << j.dump() << "\n";
  }
  atomic_write_text(path, os.str());
}

void read_samples_jsonl(const std::filesystem::path& path, FitMeta& meta,
                        std::vector<PosteriorSample>& samples) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path.string());
  std::string line;
  bool have_meta = false;
  samples.clear();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("bad JSONL line in " + path.string());
    if (j.contains("meta")) {
      const json& m = j["meta"];
      meta.model = m.at("model").get<std::string>();
      meta.seed = m.at("seed").get<std::uint64_t>();
      meta.T = m.at("T").get<std::size_t>();
      meta.p = m.at("p").get<std::size_t>();
      meta.x_mean = m.at("x_mean").get<Vec>();
      meta.x_sd = m.at("x_sd").get<Vec>();
      meta.y_mean = m.at("y_mean").get<double>();
      meta.y_sd = m.at("y_sd").get<double>();
      meta.future_x = m.at("future_x").get<Mat>();
      meta.per_state_sigma = m.at("per_state_sigma").get<bool>();
      meta.y_min_std = m.at("y_min_std").get<double>();
      meta.y_max_std = m.at("y_max_std").get<double>();
      meta.y_sd_std = m.at("y_sd_std").get<double>();
      have_meta = true;
      continue;
    }
    PosteriorSample s;
    s.iter = j.at("iter").get<int>();
    s.z = j.at("z").get<std::vector<int>>();
    s.K = j.at("K").get<int>();
    const int rows = j.at("alpha").at("rows").get<int>();
    const Vec flat = j.at("alpha").at("data").get<Vec>();
    const int cols = rows > 0 ? static_cast<int>(flat.size()) / rows : 0;
    s.alpha.assign(rows, Vec(cols));
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) s.alpha[r][c] = flat[r * cols + c];
    s.beta = j.at("beta").get<Vec>();
    s.x_star = j.at("x_star").get<Mat>();
    s.emit = emission_from_json(j.at("emission"));
    samples.push_back(std::move(s));
  }
  if (!have_meta) throw DataError("missing meta record in " + path.string());
  if (samples.empty()) throw DataError("no posterior samples in " + path.string());
}

void write_density_csv(const std::filesystem::path& path, const DensityGrid& grid,
                       const std::string& header_comment) {
  std::ostringstream os;
  std::istringstream comment(header_comment);
  std::string cl;
  while (std::getline(comment, cl)) os << "# " << cl << "\n";
  os << "y,density\n";
  os << format_double(grid.points[0]) << "," << format_double(0.0) << "\n";
  for (std::size_t i = 0; i < grid.cells(); ++i)
    os << format_double(grid.points[i + 1]) << "," << format_double(grid.values[i]) << "\n";
  atomic_write_text(path, os.str());
}

DensityGrid read_density_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open: " + path.string());
  std::string line;
  DensityGrid g;
  bool header_seen = false;
  bool first_point = true;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;  // y,density
      continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw DataError("bad density row in " + path.string());
    const double y = parse_double(cells[0], row);
    if (first_point) {
      g.points.push_back(y);
      first_point = false;
      continue;
    }
    g.points.push_back(y);
    g.values.push_back(parse_double(cells[1], row));
    g.deltas.push_back(g.points[g.points.size() - 1] - g.points[g.points.size() - 2]);
  }
  g.validate();
  return g;
}

}  // namespace nhmm
