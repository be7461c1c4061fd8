#include "hyper/hp_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hyper/errors.hpp"
#include "hyper/seeding.hpp"

namespace hyper {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::vector<int> widths_from_hp(int input_dim, int n_layers, double compression,
                                std::span<const int> depth_grid) {
  if (input_dim < 1) throw ConfigError("input dimension must be positive");
  if (std::find(depth_grid.begin(), depth_grid.end(), n_layers) == depth_grid.end()) {
    throw ConfigError("n_layers " + std::to_string(n_layers) + " is not in the depth grid");
  }
  if (n_layers < 2 || n_layers % 2 != 0) {
    throw ConfigError("n_layers must be even and at least 2, got " + std::to_string(n_layers));
  }
  if (!(compression >= 1.0)) throw ConfigError("compression rate must be >= 1.0");

  const int half = n_layers / 2;
  std::vector<int> encoder;
  double prev = input_dim;
  for (int l = 0; l < half; ++l) {
    const int w = std::max(1, static_cast<int>(std::round(prev / compression)));
    encoder.push_back(w);
    prev = w;
  }
  std::vector<int> widths = encoder;
  for (int l = half - 2; l >= 0; --l) widths.push_back(encoder[static_cast<std::size_t>(l)]);
  widths.push_back(input_dim);
  return widths;
}

std::vector<int> pad_lambda_arch(std::span<const int> widths, int max_depth) {
  const int n = static_cast<int>(widths.size());
  if (n < 1) throw ConfigError("architecture needs at least one layer");
  if (n > max_depth) {
    throw ConfigError("depth " + std::to_string(n) + " exceeds maximum depth " +
                      std::to_string(max_depth));
  }
  const int head = n / 2;
  std::vector<int> out(static_cast<std::size_t>(max_depth), 0);
  for (int i = 0; i < head; ++i) out[static_cast<std::size_t>(i)] = widths[static_cast<std::size_t>(i)];
  for (int i = head; i < n; ++i) {
    out[static_cast<std::size_t>(max_depth - n + i)] = widths[static_cast<std::size_t>(i)];
  }
  return out;
}

double HpConfig::log_weight_decay() const { return std::log10(weight_decay + 1e-8); }

long HpConfig::effective_params(int input_dim) const {
  long total = 0;
  long prev = input_dim;
  for (int w : widths) {
    total += prev * w + w;
    prev = w;
  }
  return total;
}

std::string HpConfig::key() const {
  std::string k = "w=";
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) k += ',';
    k += std::to_string(widths[i]);
  }
  return k + "|d=" + num(dropout) + "|wd=" + num(weight_decay);
}

std::string HpConfig::describe() const {
  std::ostringstream os;
  os << "L=" << n_layers << " c=" << short_num(compression) << " dropout=" << short_num(dropout)
     << " wd=" << short_num(weight_decay) << " widths=[";
  for (std::size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
  os << "]";
  return os.str();
}

bool less_complex(const HpConfig& a, const HpConfig& b, int input_dim) {
  const long pa = a.effective_params(input_dim), pb = b.effective_params(input_dim);
  if (pa != pb) return pa < pb;
  return a.key() < b.key();
}

int HpAxes::max_depth() const {
  if (n_layers.empty()) throw ConfigError("depth axis is empty");
  return *std::max_element(n_layers.begin(), n_layers.end());
}

void HpAxes::validate() const {
  if (n_layers.empty() || compression.empty() || dropout.empty() || weight_decay.empty()) {
    throw ConfigError("every hyperparameter axis needs at least one value");
  }
  for (int l : n_layers)
    if (l < 2 || l % 2 != 0) throw ConfigError("depths must be even and >= 2");
  for (double c : compression)
    if (!(c >= 1.0)) throw ConfigError("compression rates must be >= 1.0");
  for (double d : dropout)
    if (!(d >= 0.0 && d <= 0.5)) throw ConfigError("dropout values must lie in [0, 0.5]");
  for (double w : weight_decay)
    if (!(w >= 0.0)) throw ConfigError("weight decay values must be >= 0");
  auto sorted_unique = [](auto v) {
    return std::is_sorted(v.begin(), v.end()) && std::adjacent_find(v.begin(), v.end()) == v.end();
  };
  if (!sorted_unique(n_layers) || !sorted_unique(compression) || !sorted_unique(dropout) ||
      !sorted_unique(weight_decay)) {
    throw ConfigError("axis values must be strictly increasing");
  }
}

std::string HpAxes::canonical_text() const {
  std::string s = "n_layers=";
  for (int l : n_layers) s += std::to_string(l) + ",";
  s += ";compression=";
  for (double c : compression) s += num(c) + ",";
  s += ";dropout=";
  for (double d : dropout) s += num(d) + ",";
  s += ";weight_decay=";
  for (double w : weight_decay) s += num(w) + ",";
  return s;
}

std::uint64_t HpAxes::digest() const { return fnv1a64(canonical_text()); }

HpGrid::HpGrid(HpAxes axes, int input_dim) : axes_(std::move(axes)), input_dim_(input_dim) {
  axes_.validate();
  if (input_dim < 1) throw ConfigError("input dimension must be positive");
  for (int l : axes_.n_layers) {
    for (double c : axes_.compression) {
      const auto widths = widths_from_hp(input_dim, l, c, axes_.n_layers);
      for (double d : axes_.dropout) {
        for (double w : axes_.weight_decay) {
          HpConfig cfg{l, c, d, w, widths};
          if (!index_.emplace(cfg.key(), configs_.size()).second) continue;
          configs_.push_back(std::move(cfg));
        }
      }
    }
  }
}

const HpConfig& HpGrid::canonical(int n_layers, double compression, double dropout,
                                  double weight_decay) const {
  HpConfig probe{n_layers, compression, dropout, weight_decay,
                 widths_from_hp(input_dim_, n_layers, compression, axes_.n_layers)};
  auto idx = index_of(probe);
  if (!idx) throw ConfigError("configuration " + probe.describe() + " is not on the grid");
  return configs_[*idx];
}

std::optional<std::size_t> HpGrid::index_of(const HpConfig& config) const {
  auto it = index_.find(config.key());
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t HpGrid::digest() const {
  return fnv1a64(axes_.canonical_text() + "|F=" + std::to_string(input_dim_));
}

}  // namespace hyper
