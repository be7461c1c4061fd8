#include "hyper/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "hyper/errors.hpp"
#include "hyper/seeding.hpp"

namespace hyper {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) + ": '" + cell + "' is not a finite number");
  }
  return v;
}

}  // namespace

HistoricalTask Dataset::task() const {
  if (!labels) throw ContractError("dataset " + name + " has no labels");
  return {name, x, *labels};
}

std::pair<std::vector<double>, std::vector<double>> minmax_scale(Tensor& x) {
  const std::size_t n = x.rows(), f = x.cols();
  std::vector<double> lo(f, 0.0), hi(f, 0.0);
  for (std::size_t j = 0; j < f; ++j) {
    lo[j] = hi[j] = n ? x[j] : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lo[j] = std::min(lo[j], x[i * f + j]);
      hi[j] = std::max(hi[j], x[i * f + j]);
    }
    const double span = hi[j] - lo[j];
    for (std::size_t i = 0; i < n; ++i) x[i * f + j] = span > 0.0 ? (x[i * f + j] - lo[j]) / span : 0.0;
  }
  return {lo, hi};
}

Dataset parse_dataset(const std::string& text, std::string name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  Dataset d;
  d.name = std::move(name);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (line_no == 0 || line.find_first_not_of(" \t\r") == std::string::npos) throw ParseError("missing header row");
  auto header = split_line(line);
  const bool has_label = !header.empty() && header.back() == "label";
  if (has_label) header.pop_back();
  if (header.empty()) throw ParseError("line " + std::to_string(line_no) + ": no feature columns");
  d.columns = header;
  const std::size_t f = header.size();

  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_line(line);
    if (cells.size() != f + (has_label ? 1 : 0)) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(f + (has_label ? 1 : 0)) +
                       " fields, found " + std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < f; ++j) values.push_back(parse_number(cells[j], line_no));
    if (has_label) {
      const double y = parse_number(cells[f], line_no);
      if (y != 0.0 && y != 1.0) throw ParseError("line " + std::to_string(line_no) + ": label must be 0 or 1");
      labels.push_back(static_cast<int>(y));
    }
  }
  const std::size_t n = values.size() / f;
  if (n == 0) throw ParseError("dataset " + d.name + " has no rows");
  d.x = Tensor({n, f}, std::move(values));
  std::tie(d.col_min, d.col_max) = minmax_scale(d.x);
  if (has_label) {
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<long>(n)) d.warnings.push_back("dataset " + d.name + " has a single class");
    d.labels = std::move(labels);
  }
  return d;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), path.stem().string());
}

std::string format_dataset(const Dataset& d) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t j = 0; j < d.columns.size(); ++j) out << (j ? "," : "") << d.columns[j];
  if (d.labels) out << ",label";
  out << "\n";
  const std::size_t f = d.x.cols();
  for (std::size_t i = 0; i < d.x.rows(); ++i) {
    for (std::size_t j = 0; j < f; ++j) out << (j ? "," : "") << d.x[i * f + j];
    if (d.labels) out << "," << (*d.labels)[i];
    out << "\n";
  }
  return out.str();
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << format_dataset(d);
}

std::vector<Dataset> synth_testbed(int n_tasks, const SynthOptions& opt, std::uint64_t seed) {
  if (!(opt.contamination > 0.0 && opt.contamination < 0.5)) throw ConfigError("contamination must lie in (0, 0.5)");
  if (opt.dim_min < 2 || opt.dim_max < opt.dim_min) throw ConfigError("invalid dimension range");
  if (opt.n_samples < 10) throw ConfigError("too few samples per task");
  std::vector<Dataset> out;
  for (int t = 0; t < n_tasks; ++t) {
    std::mt19937_64 rng = make_stream(seed, "synth", static_cast<std::uint64_t>(t));
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int f = std::uniform_int_distribution<int>(opt.dim_min, opt.dim_max)(rng);
    const int rank = std::uniform_int_distribution<int>(
        1, std::max(1, static_cast<int>(opt.rank_fraction * f)))(rng);
    const double noise = opt.noise_min + (opt.noise_max - opt.noise_min) * u01(rng);
    const auto F = static_cast<std::size_t>(f), K = static_cast<std::size_t>(rank);

    std::vector<double> a(F * K), mu(F), dir(F);
    for (double& v : a) v = z(rng) / std::sqrt(static_cast<double>(rank));
    for (double& v : mu) v = z(rng);
    double norm = 0.0;
    for (double& v : dir) {
      v = z(rng);
      norm += v * v;
    }
    for (double& v : dir) v /= std::sqrt(norm);
    const double shift = opt.shift_min + (opt.shift_max - opt.shift_min) * u01(rng);

    const std::size_t n = opt.n_samples;
    const auto n_out = static_cast<std::size_t>(std::llround(opt.contamination * static_cast<double>(n)));
    Tensor x({n, F});
    std::vector<int> y(n, 0);
    auto manifold_point = [&](double* row) {
      std::vector<double> lat(K);
      for (double& v : lat) v = z(rng);
      for (std::size_t j = 0; j < F; ++j) {
        double s = mu[j];
        for (std::size_t k = 0; k < K; ++k) s += a[j * K + k] * lat[k];
        row[j] = s + noise * z(rng);
      }
    };
    const std::size_t n_in = n - n_out;
    for (std::size_t i = 0; i < n_in; ++i) manifold_point(x.data() + i * F);
    std::vector<double> lo(F, 1e300), hi(F, -1e300);
    for (std::size_t i = 0; i < n_in; ++i)
      for (std::size_t j = 0; j < F; ++j) {
        lo[j] = std::min(lo[j], x[i * F + j]);
        hi[j] = std::max(hi[j], x[i * F + j]);
      }
    for (std::size_t i = n_in; i < n; ++i) {
      double* row = x.data() + i * F;
      if ((i - n_in) % 2 == 0) {
        for (std::size_t j = 0; j < F; ++j) {
          const double mid = 0.5 * (lo[j] + hi[j]), half = 0.5 * opt.box_scale * (hi[j] - lo[j]);
          row[j] = mid + half * (2.0 * u01(rng) - 1.0);
        }
      } else {
        manifold_point(row);
        for (std::size_t j = 0; j < F; ++j) row[j] += shift * dir[j];
      }
      y[i] = 1;
    }
    // Shuffle rows so labels are not positional.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Dataset d;
    d.name = "synth_" + std::to_string(t);
    for (int j = 0; j < f; ++j) d.columns.push_back("x" + std::to_string(j));
    d.x = Tensor({n, F});
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(x.data() + order[i] * F, F, d.x.data() + i * F);
      labels[i] = y[order[i]];
    }
    d.labels = std::move(labels);
    std::tie(d.col_min, d.col_max) = minmax_scale(d.x);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace hyper
