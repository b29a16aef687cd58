#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>

#include "nftm/experiment.hpp"
#include "nftm/io.hpp"

using namespace nftm;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "nftm_test_config" / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("task names round-trip") {
  for (Task t : {Task::ca, Task::heat_global, Task::heat_var, Task::inpaint, Task::bench, Task::gradcheck}) {
    CHECK(parse_task(to_string(t)) == t);
  }
  CHECK_THROWS_AS(parse_task("heat"), ConfigError);
}

TEST_CASE("an empty document gives the task defaults") {
  auto c = parse_config("{}", Task::heat_var);
  CHECK(c.heat.height == 64);
  CHECK(c.heat.train.model == AlphaModelKind::spatial);
  CHECK(parse_config("{}", Task::inpaint).inpaint.train_images == 2000);
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_AS(parse_config(R"({"sed": 1})", Task::ca), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"heat": {"alpah": 0.1}})", Task::heat_global), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"inpaint": {"train": {"lr": 1e-3, "momentum": 0.9}}})", Task::inpaint),
                  ConfigError);
  try {
    parse_config(R"({"inpaint": {"mask": {"shape": "block"}}})", Task::inpaint);
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("inpaint.mask.shape") != std::string::npos);
  }
}

TEST_CASE("types and ranges are checked") {
  CHECK_THROWS_AS(parse_config(R"({"seed": -1})", Task::ca), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seed": 1.5})", Task::ca), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"heat": {"alpha": "0.1"}})", Task::heat_global), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"heat": {"alpha": 0.3}})", Task::heat_global), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"ca": {"rule": 256}})", Task::ca), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"inpaint": {"mask": {"kind": "stripes"}}})", Task::inpaint), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"bench": {"sides": [128, 64]}})", Task::bench), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"inpaint": {"cifar": "/no/such/file"}})", Task::inpaint), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json", Task::ca), ConfigError);
  CHECK_THROWS_AS(parse_config("[]", Task::ca), ConfigError);
}

TEST_CASE("the task key must agree with the command") {
  CHECK_NOTHROW(parse_config(R"({"task": "bench"})", Task::bench));
  CHECK_THROWS_AS(parse_config(R"({"task": "bench"})", Task::ca), ConfigError);
}

TEST_CASE("choosing life switches the training defaults unless overridden") {
  auto c = parse_config(R"({"ca": {"kind": "life"}})", Task::ca);
  CHECK(c.ca.train.hidden == CaTrainConfig::life_defaults().hidden);
  auto d = parse_config(R"({"ca": {"kind": "life", "train": {"epochs": 7}}})", Task::ca);
  CHECK(d.ca.train.epochs == 7);
}

TEST_CASE("resolved config reproduces the parsed config") {
  auto c = parse_config(
      R"({"seed": 9, "inpaint": {"eval_beta": 0.25, "mask": {"kind": "block"}, "train": {"lr": 0.001, "activation": "tanh"}}})",
      Task::inpaint);
  const std::string text = resolved_config_json(c);
  auto again = parse_config(text, Task::inpaint);
  CHECK(resolved_config_json(again) == text);
  CHECK(again.seed == 9);
  CHECK(again.inpaint.mask.kind == MaskKind::block);
  CHECK(again.inpaint.train.activation == Pointwise::tanh);
  CHECK(again.inpaint.train.lr == 0.001);
}

TEST_CASE("a missing config file is a configuration error") {
  CHECK_THROWS_AS(load_config("/no/such/config.json", Task::ca), ConfigError);
}

TEST_CASE("a ca run writes only inside out_dir and is reproducible") {
  const fs::path root = scratch_dir("ca");
  auto c = default_config(Task::ca);
  c.out_dir = (root / "a").string();
  c.ca.horizons = {20};
  c.ca.eval_width = 31;
  CHECK(run_task(c));
  for (const char* f : {"config.json", "metrics.jsonl", "summary.json", "rule110_T20_nftm.pgm", "rule110_T20_exact.pgm"}) {
    CHECK(fs::exists(root / "a" / f));
  }
  std::size_t entries = 0;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) ++entries;
  CHECK(entries == 1 + 5);

  auto again = load_config(root / "a" / "config.json", Task::ca);
  again.out_dir = (root / "b").string();
  run_task(again);
  CHECK(read_metrics(root / "a" / "metrics.jsonl") == read_metrics(root / "b" / "metrics.jsonl"));
  auto trace = read_pnm(root / "a" / "rule110_T20_nftm.pgm");
  CHECK(trace.height == 21);
  CHECK(trace.width == 31);
}

TEST_CASE("gradcheck and bench runners report per-case and per-size records") {
  const fs::path root = scratch_dir("small");
  auto g = default_config(Task::gradcheck);
  g.out_dir = (root / "g").string();
  g.gradcheck.trials = 2;
  g.gradcheck.filter = "pointwise";
  auto gr = run_gradcheck(g);
  CHECK(gr.cases.size() == 9);
  CHECK(gr.max_rel_error <= 1e-4);
  CHECK(read_metrics(root / "g" / "metrics.jsonl").size() == 9);

  auto b = default_config(Task::bench);
  b.out_dir = (root / "b").string();
  b.bench.sides = {8};
  b.bench.steps = 2;
  b.bench.repeats = 1;
  auto br = run_bench(b);
  CHECK_FALSE(br.fitted);
  CHECK(br.seconds_per_step.size() == 1);
  CHECK(br.seconds_per_step[0] > 0.0);
}
