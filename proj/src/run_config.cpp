#include "hyper/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <type_traits>

#include "hyper/errors.hpp"

namespace hyper {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T number(const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError("'" + text + "' is not a valid number");
  return v;
}

template <class T>
std::vector<T> number_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(number<T>(trim(item)));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += fmt(v[i]);
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class T, class Access>
Field num_field(std::string key, Access access) {
  return {std::move(key),
          [access](const RunConfig& c) {
            const T v = access(const_cast<RunConfig&>(c));
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(v);
            } else {
              return std::to_string(v);
            }
          },
          [access](RunConfig& c, const std::string& s) { access(c) = number<T>(s); }};
}

template <class T, class Access>
Field list_field(std::string key, Access access) {
  return {std::move(key), [access](const RunConfig& c) { return join(access(const_cast<RunConfig&>(c))); },
          [access](RunConfig& c, const std::string& s) { access(c) = number_list<T>(s); }};
}

Field text_field(std::string key, std::string RunConfig::*member) {
  return {std::move(key), [member](const RunConfig& c) { return c.*member; },
          [member](RunConfig& c, const std::string& s) { c.*member = s; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      num_field<std::uint64_t>("seed", [](RunConfig& c) -> auto& { return c.seed; }),
      list_field<int>("grid.n_layers", [](RunConfig& c) -> auto& { return c.axes.n_layers; }),
      list_field<double>("grid.compression", [](RunConfig& c) -> auto& { return c.axes.compression; }),
      list_field<double>("grid.dropout", [](RunConfig& c) -> auto& { return c.axes.dropout; }),
      list_field<double>("grid.weight_decay", [](RunConfig& c) -> auto& { return c.axes.weight_decay; }),
      num_field<int>("hn.hidden", [](RunConfig& c) -> auto& { return c.hn.hidden; }),
      num_field<int>("hn.d_pe", [](RunConfig& c) -> auto& { return c.hn.d_pe; }),
      num_field<double>("hn.dropout", [](RunConfig& c) -> auto& { return c.hn.dropout; }),
      num_field<int>("hn.epochs", [](RunConfig& c) -> auto& { return c.hn.epochs; }),
      {"hn.optimizer",
       [](const RunConfig& c) { return std::string(c.hn.train.optimizer == HnOptimizer::adam ? "adam" : "sgd_momentum"); },
       [](RunConfig& c, const std::string& s) {
         if (s == "adam") {
           c.hn.train.optimizer = HnOptimizer::adam;
         } else if (s == "sgd_momentum") {
           c.hn.train.optimizer = HnOptimizer::sgd_momentum;
         } else {
           throw ConfigError("optimizer must be adam or sgd_momentum");
         }
       }},
      num_field<double>("hn.lr", [](RunConfig& c) -> auto& { return c.hn.train.lr; }),
      num_field<double>("hn.momentum", [](RunConfig& c) -> auto& { return c.hn.train.momentum; }),
      num_field<std::size_t>("hn.batch", [](RunConfig& c) -> auto& { return c.hn.train.batch_samples; }),
      num_field<std::size_t>("hn.configs_per_step", [](RunConfig& c) -> auto& { return c.hn.train.configs_per_step; }),
      num_field<int>("extractor.k", [](RunConfig& c) -> auto& { return c.extractor.k; }),
      num_field<int>("extractor.epochs", [](RunConfig& c) -> auto& { return c.extractor.epochs; }),
      num_field<std::size_t>("extractor.batch", [](RunConfig& c) -> auto& { return c.extractor.batch; }),
      num_field<double>("extractor.lr", [](RunConfig& c) -> auto& { return c.extractor.lr; }),
      num_field<std::size_t>("extractor.max_rows_per_task", [](RunConfig& c) -> auto& { return c.extractor.max_rows_per_task; }),
      num_field<int>("encoder.epochs", [](RunConfig& c) -> auto& { return c.encoder.epochs; }),
      num_field<std::size_t>("encoder.batch_sets", [](RunConfig& c) -> auto& { return c.encoder.batch_sets; }),
      num_field<double>("encoder.lr", [](RunConfig& c) -> auto& { return c.encoder.lr; }),
      num_field<int>("fval.trees", [](RunConfig& c) -> auto& { return c.gbdt.trees; }),
      num_field<int>("fval.depth", [](RunConfig& c) -> auto& { return c.gbdt.depth; }),
      num_field<double>("fval.shrinkage", [](RunConfig& c) -> auto& { return c.gbdt.shrinkage; }),
      num_field<double>("fval.valid_fraction", [](RunConfig& c) -> auto& { return c.gbdt.valid_fraction; }),
      num_field<int>("fval.min_leaf", [](RunConfig& c) -> auto& { return c.gbdt.min_leaf; }),
      num_field<int>("search.T", [](RunConfig& c) -> auto& { return c.search.hn_epochs; }),
      num_field<int>("search.V", [](RunConfig& c) -> auto& { return c.search.samples; }),
      num_field<int>("search.patience", [](RunConfig& c) -> auto& { return c.search.patience; }),
      num_field<double>("search.tau", [](RunConfig& c) -> auto& { return c.search.tau; }),
      num_field<double>("search.tolerance", [](RunConfig& c) -> auto& { return c.search.tolerance; }),
      num_field<int>("search.max_iterations", [](RunConfig& c) -> auto& { return c.search.max_iterations; }),
      num_field<std::size_t>("search.candidate_cap", [](RunConfig& c) -> auto& { return c.search.candidate_cap; }),
      list_field<double>("search.sigma.n_layers", [](RunConfig& c) -> auto& { return c.search.sigma_grid.values[0]; }),
      list_field<double>("search.sigma.compression", [](RunConfig& c) -> auto& { return c.search.sigma_grid.values[1]; }),
      list_field<double>("search.sigma.dropout", [](RunConfig& c) -> auto& { return c.search.sigma_grid.values[2]; }),
      list_field<double>("search.sigma.log_weight_decay", [](RunConfig& c) -> auto& { return c.search.sigma_grid.values[3]; }),
      num_field<int>("scratch.epochs", [](RunConfig& c) -> auto& { return c.scratch.epochs; }),
      num_field<std::size_t>("scratch.batch", [](RunConfig& c) -> auto& { return c.scratch.batch; }),
      num_field<double>("scratch.lr", [](RunConfig& c) -> auto& { return c.scratch.lr; }),
      text_field("paths.store", &RunConfig::store_dir),
      text_field("paths.output", &RunConfig::output_dir),
  };
  return f;
}

}  // namespace

MetaOptions RunConfig::meta_options() const { return {axes, hn, extractor, encoder, gbdt}; }

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const auto where = "line " + std::to_string(no) + ": ";
    if (eq == std::string::npos) throw ParseError(where + "expected key = value");
    const std::string key = trim(body.substr(0, eq)), value = trim(body.substr(eq + 1));
    const auto& fs = fields();
    const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.key == key; });
    if (it == fs.end()) throw ParseError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ParseError(where + "duplicate key '" + key + "'");
    try {
      it->set(c, value);
    } catch (const ConfigError& e) {
      throw ParseError(where + key + ": " + e.what());
    }
  }
  c.axes.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read run config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_text();
}

}  // namespace hyper
