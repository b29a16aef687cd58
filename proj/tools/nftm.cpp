// nftm: experiment driver.
//
//   nftm <ca|heat-global|heat-var|inpaint|bench|gradcheck> [--config FILE]
//        [--out-dir DIR] [--seed N] [task options]
//
// Exit codes: 0 success, 2 invalid configuration, 1 runtime failure. Errors
// are reported as one JSON object on stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nftm/experiment.hpp"
#include "nftm/kernels.hpp"

namespace {

using nftm::ConfigError;
using nftm::ExperimentConfig;
using nftm::Task;

int report_error(const std::string& kind, const std::string& message, int code,
                 const std::optional<std::filesystem::path>& out_dir = {}) {
  nlohmann::json j = {{"error", message}, {"kind", kind}, {"exit_code", code}};
  std::cerr << j.dump() << std::endl;
  if (out_dir && std::filesystem::is_directory(*out_dir)) std::ofstream(*out_dir / "error.json") << j.dump(2) << "\n";
  return code;
}

void apply_threads_env() {
  const char* env = std::getenv("NFTM_THREADS");
  if (!env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 0) {
    throw ConfigError(std::string("NFTM_THREADS must be a non-negative integer, got '") + env + "'");
  }
  nftm::set_thread_count(static_cast<int>(n));
}

struct Overrides {
  std::string config;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> rule;
  bool life = false;
  std::optional<double> alpha;
  std::optional<std::string> cifar;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> train_images;
  std::optional<std::vector<std::size_t>> sides;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> trials;
  std::optional<std::string> filter;
};

ExperimentConfig resolve(Task task, const Overrides& o) {
  ExperimentConfig cfg = o.config.empty() ? nftm::default_config(task) : nftm::load_config(o.config, task);
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.seed) cfg.seed = *o.seed;
  if (o.life) {
    cfg.ca.kind = nftm::CaKind::life;
    cfg.ca.train = nftm::CaTrainConfig::life_defaults();
  }
  if (o.rule) cfg.ca.rule = *o.rule;
  if (o.alpha) cfg.heat.alpha = *o.alpha;
  if (o.cifar) cfg.inpaint.cifar = *o.cifar;
  if (o.epochs) cfg.inpaint.train.epochs = *o.epochs;
  if (o.train_images) cfg.inpaint.train_images = *o.train_images;
  if (o.sides) cfg.bench.sides = *o.sides;
  if (o.steps) cfg.bench.steps = *o.steps;
  if (o.trials) cfg.gradcheck.trials = *o.trials;
  if (o.filter) cfg.gradcheck.filter = *o.filter;
  nftm::validate(cfg);
  return cfg;
}

template <class T>
void opt(CLI::App* app, const std::string& name, std::optional<T>& slot, const std::string& help) {
  app->add_option_function<T>(name, [&slot](const T& v) { slot = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural field Turing machine experiments"};
  app.require_subcommand(1);
  Overrides o;
  std::optional<Task> chosen;

  auto add_task = [&](Task t, const std::string& help) {
    CLI::App* sub = app.add_subcommand(std::string(nftm::to_string(t)), help);
    sub->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    opt(sub, "--out-dir", o.out_dir, "Output directory (all artifacts go here)");
    opt(sub, "--seed", o.seed, "Master seed");
    sub->callback([&chosen, t] { chosen = t; });
    return sub;
  };
  auto* ca = add_task(Task::ca, "Learn an elementary rule (default 110) or Life and compare with the exact automaton");
  opt(ca, "--rule", o.rule, "Elementary rule number");
  ca->add_flag("--life", o.life, "Learn Conway's Game of Life");
  auto* hg = add_task(Task::heat_global, "Recover a global diffusion coefficient");
  opt(hg, "--alpha", o.alpha, "True alpha");
  add_task(Task::heat_var, "Recover a spatially varying diffusion map");
  auto* ip = add_task(Task::inpaint, "Train and evaluate the guarded inpainting machine");
  opt(ip, "--cifar", o.cifar, "CIFAR-10 binary batch (synthetic images otherwise)");
  opt(ip, "--epochs", o.epochs, "Training epochs");
  opt(ip, "--train-images", o.train_images, "Training images");
  auto* bn = add_task(Task::bench, "Per-step cost of the machine against grid size");
  opt(bn, "--sides", o.sides, "Grid sides, increasing");
  opt(bn, "--steps", o.steps, "Steps per timing");
  auto* gc = add_task(Task::gradcheck, "Finite-difference check of every differentiable op");
  opt(gc, "--trials", o.trials, "Random instances per op");
  opt(gc, "--filter", o.filter, "Only cases whose name contains this");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("config", e.what(), 2);
  }

  ExperimentConfig cfg;
  try {
    apply_threads_env();
    cfg = resolve(*chosen, o);
  } catch (const ConfigError& e) {
    return report_error("config", e.what(), 2);
  } catch (const std::invalid_argument& e) {
    return report_error("config", e.what(), 2);
  }

  try {
    const bool passed = nftm::run_task(cfg);
    std::ifstream summary(std::filesystem::path(cfg.out_dir) / "summary.json");
    std::cout << summary.rdbuf();
    std::cout << (passed ? "checks passed" : "checks NOT met") << std::endl;
  } catch (const std::exception& e) {
    return report_error("runtime", e.what(), 1, std::filesystem::path(cfg.out_dir));
  }
  return 0;
}
