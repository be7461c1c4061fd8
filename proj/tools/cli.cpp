#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "acceptance/criteria.hpp"
#include "hyper/dataset.hpp"
#include "hyper/errors.hpp"
#include "hyper/evaluation.hpp"
#include "hyper/online_search.hpp"
#include "hyper/run_config.hpp"
#include "hyper/seeding.hpp"

namespace hyper {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Args {
  std::string config, store, out, data;
  std::vector<std::string> files;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int tasks = 16;
  SynthOptions synth;
};

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << text;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config_error";
  if (dynamic_cast<const ParseError*>(&e)) return "parse_error";
  if (dynamic_cast<const VersionError*>(&e)) return "version_error";
  if (dynamic_cast<const SamplingRangeError*>(&e)) return "sampling_range_error";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric_error";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension_error";
  if (dynamic_cast<const ContractError*>(&e)) return "contract_error";
  if (dynamic_cast<const Error*>(&e)) return "error";
  return "internal_error";
}

// Explicit --config wins, then the run config stored next to the meta store,
// then defaults. --seed overrides whichever was chosen.
RunConfig resolve_config(const Args& a, bool from_store) {
  RunConfig c;
  if (!a.config.empty()) {
    c = RunConfig::load(a.config);
  } else if (from_store && !a.store.empty() && fs::exists(fs::path(a.store) / "run.cfg")) {
    c = RunConfig::load(fs::path(a.store) / "run.cfg");
  }
  if (a.seed_set) c.seed = a.seed;
  if (!a.store.empty()) c.store_dir = a.store;
  if (!a.out.empty()) c.output_dir = a.out;
  return c;
}

Dataset load_labeled(const std::string& path) {
  Dataset d = load_dataset(path);
  if (!d.labeled()) throw ConfigError(path + " has no label column");
  return d;
}

int cmd_synth(const Args& a, std::ostream& out) {
  const fs::path dir(a.out);
  fs::create_directories(dir);
  for (const auto& d : synth_testbed(a.tasks, a.synth, a.seed)) {
    save_dataset(d, dir / (d.name + ".csv"));
    out << (dir / (d.name + ".csv")).string() << "\n";
  }
  return 0;
}

int cmd_meta_train(const Args& a, std::ostream& out) {
  const RunConfig cfg = resolve_config(a, false);
  if (cfg.store_dir.empty()) throw ConfigError("meta-train needs a store directory (--store)");
  std::vector<HistoricalTask> tasks;
  for (const auto& f : a.files) tasks.push_back(load_labeled(f).task());
  const auto result = meta_train(tasks, cfg.meta_options(), cfg.seed);
  result.store.save(cfg.store_dir);
  cfg.save(fs::path(cfg.store_dir) / "run.cfg");
  const HpGrid grid(cfg.axes, result.store.reference_dim);
  out << "global best: " << resolve(grid, result.store.best).describe() << "\n";
  for (const auto& w : result.store.warnings) out << "warning: " << w << "\n";
  return 0;
}

int cmd_select(const Args& a, std::ostream& out) {
  if (a.store.empty()) throw ConfigError("select needs a MetaStore path (--store)");
  const RunConfig cfg = resolve_config(a, true);
  const MetaStore store = MetaStore::load(cfg.store_dir);
  const Dataset d = load_dataset(a.data);
  const auto r = hyper_select(d.x, store, cfg.search, derive_seed(cfg.seed, "select"));
  if (!cfg.output_dir.empty()) {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    write(dir / "report.json", r.report());
    write(dir / "timing.json", r.timing_report());
    std::string scores = "score\n";
    for (double s : r.scores) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g\n", s);
      scores += buf;
    }
    write(dir / "scores.csv", scores);
    cfg.save(dir / "run.cfg");
  } else {
    out << r.report();
  }
  out << "selected: " << r.selected.describe() << "\n";
  return 0;
}

int cmd_eval(const Args& a, std::ostream& out) {
  if (a.store.empty()) throw ConfigError("eval needs a MetaStore path (--store)");
  const RunConfig cfg = resolve_config(a, true);
  const MetaStore store = MetaStore::load(cfg.store_dir);
  EvaluationSummary summary;
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    const Dataset d = load_labeled(a.files[i]);
    const HpGrid grid(store.axes, static_cast<int>(d.x.cols()));
    const auto r = hyper_select(d.x, store, cfg.search, derive_seed(cfg.seed, "select", i));
    const auto truth = scratch_truth(d.x, *d.labels, grid, cfg.scratch, derive_seed(cfg.seed, "truth", i));
    summary.tasks.push_back(evaluate_selection(d.name, truth, r.selected, store, grid));
    if (!cfg.output_dir.empty()) {
      fs::create_directories(cfg.output_dir);
      write(fs::path(cfg.output_dir) / (d.name + ".report.json"), r.report());
    }
  }
  if (!cfg.output_dir.empty()) {
    write(fs::path(cfg.output_dir) / "eval.json", summary.report());
    cfg.save(fs::path(cfg.output_dir) / "run.cfg");
  }
  out << summary.report();
  return 0;
}

int cmd_check(std::ostream& out) {
  bool ok = true;
  for (const auto& r : acceptance::quick_checks()) {
    out << r.line() << "\n";
    ok &= r.pass;
  }
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hypernetwork-based model selection for autoencoder outlier detectors"};
  app.require_subcommand(1);
  Args a;
  const auto seed_opt = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { a.seed = s, a.seed_set = true; }, "master seed");
  };

  auto* synth = app.add_subcommand("synth", "write the synthetic testbed as CSV files");
  synth->add_option("--out", a.out, "output directory")->required();
  synth->add_option("--tasks", a.tasks, "number of tasks")->check(CLI::PositiveNumber);
  synth->add_option("--samples", a.synth.n_samples, "rows per task");
  synth->add_option("--dim-min", a.synth.dim_min, "smallest feature count");
  synth->add_option("--dim-max", a.synth.dim_max, "largest feature count");
  synth->add_option("--contamination", a.synth.contamination, "outlier share")->check(CLI::Range(0.0, 0.5));
  seed_opt(synth);

  auto* meta = app.add_subcommand("meta-train", "build a MetaStore from labeled datasets");
  meta->add_option("--data", a.files, "labeled CSV files")->required()->check(CLI::ExistingFile);
  meta->add_option("--store", a.store, "MetaStore directory to write");
  meta->add_option("--config", a.config, "run config")->check(CLI::ExistingFile);
  seed_opt(meta);

  auto* select = app.add_subcommand("select", "choose a configuration for an unlabeled dataset");
  select->add_option("--store", a.store, "MetaStore directory");
  select->add_option("--data", a.data, "CSV file")->required()->check(CLI::ExistingFile);
  select->add_option("--out", a.out, "output directory for report, scores and run config");
  select->add_option("--config", a.config, "run config")->check(CLI::ExistingFile);
  seed_opt(select);

  auto* eval = app.add_subcommand("eval", "select on labeled datasets and compare with the baselines");
  eval->add_option("--store", a.store, "MetaStore directory");
  eval->add_option("--data", a.files, "labeled CSV files")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", a.out, "output directory");
  eval->add_option("--config", a.config, "run config")->check(CLI::ExistingFile);
  seed_opt(eval);

  auto* check = app.add_subcommand("check", "run the oracle and invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*synth) return cmd_synth(a, out);
    if (*meta) return cmd_meta_train(a, out);
    if (*select) return cmd_select(a, out);
    if (*eval) return cmd_eval(a, out);
    if (*check) return cmd_check(out);
  } catch (const std::exception& e) {
    err << json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace hyper
