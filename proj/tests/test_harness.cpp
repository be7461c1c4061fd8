#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "hyper/dataset.hpp"
#include "hyper/errors.hpp"
#include "hyper/evaluation.hpp"
#include "hyper/metrics.hpp"
#include "hyper/run_config.hpp"
#include "hyper/seeding.hpp"
#include "support/tiny_meta.hpp"

using namespace hyper;
namespace fs = std::filesystem;

namespace {

std::string error_text(const std::string& csv) {
  try {
    parse_dataset(csv);
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Cli {
  int code = 0;
  std::string out, err;
};

Cli cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hyper");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Cli r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hyper_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig tiny_run() {
  const auto m = testing::tiny_options();
  RunConfig c;
  c.seed = 3;
  c.axes = m.axes;
  c.hn = m.hn;
  c.extractor = m.extractor;
  c.encoder = m.encoder;
  c.gbdt = m.gbdt;
  c.search.hn_epochs = 4;
  c.search.samples = 20;
  c.search.max_iterations = 6;
  c.scratch.epochs = 5;
  return c;
}

}  // namespace

TEST_CASE("dataset parsing errors carry line numbers") {
  CHECK(error_text("a,b\n1,2\n3\n").find("line 3") != std::string::npos);
  CHECK(error_text("a,b\n1,2\n3,x\n").find("line 3") != std::string::npos);
  CHECK(error_text("a,label\n1,0\n2,2\n").find("line 3") != std::string::npos);
  CHECK(error_text("a,b\n1,nan\n").find("line 2") != std::string::npos);
  CHECK_THROWS_AS(parse_dataset("a,b\n"), ParseError);
  CHECK_THROWS_AS(parse_dataset(""), ParseError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.csv"), ConfigError);
}

TEST_CASE("dataset scaling, labels and round trip") {
  const auto d = parse_dataset("a,b,label\n1,5,0\n3,5,1\n2,5,0\n");
  REQUIRE(d.labeled());
  CHECK(d.x.rows() == 3);
  CHECK(d.x[0] == 0.0);
  CHECK(d.x[2] == 1.0);
  CHECK(d.x[4] == 0.5);
  CHECK(d.x[1] == 0.0);  // constant column
  CHECK(*d.labels == std::vector<int>{0, 1, 0});
  CHECK(d.warnings.empty());

  const auto again = parse_dataset(format_dataset(d));
  CHECK(format_dataset(again) == format_dataset(d));

  const auto one = parse_dataset("a,label\n1,0\n2,0\n");
  CHECK(one.warnings.size() == 1);
  CHECK_FALSE(parse_dataset("a,b\n1,2\n").labeled());
}

TEST_CASE("synthetic testbed") {
  SynthOptions s;
  s.n_samples = 300;
  const auto a = synth_testbed(3, s, 17);
  const auto b = synth_testbed(3, s, 17);
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].x.rows() == 300);
    CHECK(std::count(a[t].labels->begin(), a[t].labels->end(), 1) == 30);
    CHECK(a[t].x.cols() >= 6);
    CHECK(a[t].x.cols() <= 10);
    CHECK(format_dataset(a[t]) == format_dataset(b[t]));
  }
  CHECK(format_dataset(synth_testbed(1, s, 18)[0]) != format_dataset(a[0]));
  // Task t does not depend on how many tasks were requested.
  CHECK(format_dataset(synth_testbed(1, s, 17)[0]) == format_dataset(a[0]));
}

TEST_CASE("a full-capacity detector separates the synthetic outliers") {
  SynthOptions s;
  s.n_samples = 400;
  const auto d = synth_testbed(1, s, 4)[0];
  const HpGrid grid(HpAxes{}, static_cast<int>(d.x.cols()));
  auto rng = make_stream(4, "fit");
  const auto w = train_from_scratch(d.x, grid.canonical(2, 1.0, 0.0, 0.0), grid.max_depth(), {}, rng);
  CHECK(auroc(outlier_scores(d.x, w).scores, *d.labels) > 0.8);
}

TEST_CASE("run config round trip") {
  RunConfig c = tiny_run();
  c.hn.train.lr = 0.1 + 0.2;
  c.search.sigma_grid.values[1] = {0.01, 0.02};
  c.store_dir = "some/store";
  const auto text = c.to_text();
  const auto back = RunConfig::parse(text);
  CHECK(back.to_text() == text);
  CHECK(back.hn.train.lr == c.hn.train.lr);
  CHECK(back.axes.compression == c.axes.compression);
  CHECK(back.search.samples == 20);

  const auto dflt = RunConfig::parse("# nothing set\n\n");
  CHECK(dflt.to_text() == RunConfig{}.to_text());
}

TEST_CASE("run config errors") {
  const auto message = [](const std::string& text) {
    try {
      RunConfig::parse(text);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("seed = 1\nnope = 2\n").find("line 2") != std::string::npos);
  CHECK(message("seed = 1\nseed = 2\n").find("line 2") != std::string::npos);
  CHECK(message("\nsearch.T = many\n").find("line 2") != std::string::npos);
  CHECK(message("seed\n").find("line 1") != std::string::npos);
  CHECK_THROWS(RunConfig::load("/nonexistent/run.cfg"));
}

TEST_CASE("baselines") {
  SUBCASE("default is the nearest grid member") {
    const HpGrid grid(HpAxes{}, 8);
    const auto& d = baseline_default(grid);
    CHECK(d.n_layers == 4);
    CHECK(d.dropout == 0.2);
    CHECK(d.weight_decay == 0.0);
    CHECK(d.key() == grid.canonical(4, 1.0, 0.2, 0.0).key());

    const HpGrid coarse(HpAxes{{2, 6}, {1.5, 3.0}, {0.0, 0.4}, {1e-6, 1e-5}}, 8);
    const auto& c = baseline_default(coarse);
    CHECK(c.n_layers == 2);
    CHECK(c.compression == 1.5);
    CHECK(c.dropout == 0.0);
    CHECK(c.weight_decay == 1e-6);
  }

  SUBCASE("random expectation has mean rank one half") {
    const std::vector<double> perf{0.9, 0.1, 0.5, 0.5, 0.7};
    const auto r = baseline_random(perf);
    CHECK(r.expected_performance == doctest::Approx(0.54));
    CHECK(r.expected_rank == doctest::Approx(0.5));
  }

  SUBCASE("global best delegates to the store") {
    const auto& store = testing::tiny_meta().store;
    const HpGrid grid(store.axes, 5);
    CHECK(baseline_global_best(store, grid).key() == resolve(grid, store.best).key());
  }

  SUBCASE("one-configuration grid makes every method coincide") {
    const auto d = testing::tiny_tasks(1, 8)[0];
    const HpAxes axes{{2}, {1.0}, {0.0}, {0.0}};
    const HpGrid grid(axes, static_cast<int>(d.x.cols()));
    MetaStore store;
    store.axes = axes;
    store.best = {2, 1.0, 0.0, 0.0};
    ScratchTrainOptions o;
    o.epochs = 3;
    const auto truth = scratch_truth(d.x, *d.labels, grid, o, 1);
    const auto e = evaluate_selection(d.name, truth, grid[0], store, grid);
    for (const auto& m : e.methods) {
      CHECK(m.auroc == truth.auroc[0]);
      CHECK(m.rank == 0.0);
    }
  }
}

TEST_CASE("cli usage and error exits") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"select", "--bogus"}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"--help"}).code == 0);

  const auto dir = scratch_dir("errors");
  const auto d = synth_testbed(1, {}, 1)[0];
  save_dataset(d, dir / "task.csv");
  const auto r = cli({"select", "--data", (dir / "task.csv").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("\"error\":\"config_error\"") != std::string::npos);

  const auto missing = cli({"select", "--store", (dir / "nostore").string(), "--data", (dir / "task.csv").string()});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("\"error\"") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cli meta-train then select is reproducible") {
  const auto dir = scratch_dir("flow");
  CHECK(cli({"synth", "--out", (dir / "data").string(), "--tasks", "7", "--samples", "200", "--dim-min", "4",
             "--dim-max", "6", "--seed", "21"})
            .code == 0);
  tiny_run().save(dir / "tiny.cfg");

  std::vector<std::string> train{"meta-train", "--store", (dir / "store").string(), "--config",
                                 (dir / "tiny.cfg").string(), "--data"};
  for (int t = 0; t < 6; ++t) train.push_back((dir / "data" / ("synth_" + std::to_string(t) + ".csv")).string());
  for (const auto& p : fs::directory_iterator(dir / "data")) CHECK(p.path().extension() == ".csv");
  const auto trained = cli(train);
  INFO(trained.err);
  REQUIRE(trained.code == 0);
  CHECK(fs::exists(dir / "store" / "run.cfg"));

  const auto held_out = (dir / "data" / "synth_6.csv").string();
  const auto run = [&](const std::string& out) {
    return cli({"select", "--store", (dir / "store").string(), "--data", held_out, "--out", (dir / out).string()});
  };
  const auto a = run("a");
  const auto b = run("b");
  INFO(a.err);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
  CHECK(slurp(dir / "a" / "scores.csv") == slurp(dir / "b" / "scores.csv"));
  CHECK(fs::exists(dir / "a" / "timing.json"));
  CHECK(RunConfig::load(dir / "a" / "run.cfg").search.samples == 20);

  std::istringstream scores(slurp(dir / "a" / "scores.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(scores, line)) ++rows;
  CHECK(rows == 201);
  fs::remove_all(dir);
}
