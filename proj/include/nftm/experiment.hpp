#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nftm/ca.hpp"
#include "nftm/gradcheck_suite.hpp"
#include "nftm/heat.hpp"
#include "nftm/inpaint.hpp"

namespace nftm {

enum class Task { ca, heat_global, heat_var, inpaint, bench, gradcheck };
Task parse_task(std::string_view name);
std::string_view to_string(Task t);

// Invalid configuration; the CLI maps it to exit code 2.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CaExperiment {
  CaKind kind = CaKind::elementary;
  int rule = 110;
  CaTrainConfig train = CaTrainConfig::elementary_defaults();
  std::size_t eval_width = 101;
  std::vector<std::size_t> horizons{100, 200};
  // Life: held-out random states of life_size x life_size, one step each.
  std::size_t life_size = 16;
  std::size_t life_trials = 100;
};

struct HeatExperiment {
  double alpha = 0.15;  // global task only
  std::size_t height = 32, width = 32;
  std::size_t sequences = 16;
  std::size_t frames = 10;  // transitions per training sequence
  std::size_t eval_sequences = 4;
  std::size_t eval_steps = 50;
  HeatDataOptions data;
  PdeTrainConfig train;
};

struct InpaintExperiment {
  std::size_t height = 32, width = 32;
  std::size_t train_images = 2000;
  std::size_t test_images = 200;
  // Optional CIFAR-10 batch file; synthetic blobs when empty.
  std::string cifar;
  MaskSpec mask;
  InpaintConfig train;
  // Evaluation step size; negative means the final training beta.
  double eval_beta = -1.0;
  std::size_t filmstrips = 4;
};

struct BenchExperiment {
  std::vector<std::size_t> sides{64, 128, 256};
  std::size_t steps = 20;
  std::size_t repeats = 5;
  // Per-cell controller cost: an MLP over the 3x3 neighbourhood of this width.
  std::size_t controller_hidden = 16;
};

struct GradcheckExperiment {
  std::size_t trials = 100;
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::string filter;
};

struct ExperimentConfig {
  Task task = Task::ca;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  CaExperiment ca;
  HeatExperiment heat;
  InpaintExperiment inpaint;
  BenchExperiment bench;
  GradcheckExperiment gradcheck;
};

// Defaults for a task (heat-var uses a 64x64 grid and the spatial model).
ExperimentConfig default_config(Task task);
// Strict parse: unknown keys, wrong types and out-of-range values throw
// ConfigError. `task` fills in when the document has no "task" key and must
// match it otherwise.
ExperimentConfig parse_config(std::string_view json_text, Task task);
ExperimentConfig load_config(const std::filesystem::path& path, Task task);
// Every field, pretty-printed with sorted keys; parse_config round-trips it.
std::string resolved_config_json(const ExperimentConfig& cfg);
// Rejects inconsistent settings with ConfigError.
void validate(const ExperimentConfig& cfg);

struct CaResult {
  bool table_match = false;
  std::size_t table_mismatches = 0;
  std::vector<std::size_t> horizons;
  std::vector<bool> rollout_match;  // per horizon
  std::size_t life_matches = 0;
  std::size_t life_trials = 0;
  double seconds = 0.0;
};

struct HeatResult {
  std::vector<double> alpha_hat;  // one entry (global) or cells
  double alpha_abs_error = 0.0;   // global
  double alpha_mae = 0.0;         // spatial
  std::vector<double> rollout_psnr;  // mean over eval sequences, steps 1..eval_steps
  double mean_psnr = 0.0;
  double seconds = 0.0;
};

struct InpaintResult {
  EvalResult guarded;
  EvalResult unguarded;
  std::size_t energy_violations = 0;
  InpaintTrainReport train;
  double seconds = 0.0;
};

struct BenchResult {
  std::vector<std::size_t> cells;
  std::vector<double> seconds_per_step;
  // Fitted exponent of time ~ cells^slope (absent with one size).
  double slope = 0.0;
  bool fitted = false;
  // time(2T) / time(T) at the smallest size.
  double doubling_ratio = 0.0;
};

struct GradcheckResult {
  std::vector<GradCheckSummary> cases;
  double max_rel_error = 0.0;
  double seconds = 0.0;
};

// Each runner writes its artifacts, metrics.jsonl and config.json into
// cfg.out_dir and returns the headline numbers.
CaResult run_ca(const ExperimentConfig& cfg);
HeatResult run_heat(const ExperimentConfig& cfg);
InpaintResult run_inpaint(const ExperimentConfig& cfg);
BenchResult run_bench(const ExperimentConfig& cfg);
GradcheckResult run_gradcheck(const ExperimentConfig& cfg);

// Dispatches on cfg.task and writes summary.json. Returns true when the
// task's own success check holds.
bool run_task(const ExperimentConfig& cfg);

// Mean wall time of one step of a dense per-cell NFTM on an n x n grid:
// 3x3 reads, an MLP controller per cell, direct write.
double time_machine_step(std::size_t side, std::size_t steps, std::size_t repeats, std::size_t hidden,
                         std::uint64_t seed);

}  // namespace nftm
