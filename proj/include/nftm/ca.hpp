#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nftm/field.hpp"
#include "nftm/nn.hpp"
#include "nftm/optim.hpp"

namespace nftm {

enum class CaKind { elementary, life };

using Bits = std::vector<std::uint8_t>;

/// Output bit per neighbourhood configuration. Elementary rules index by
/// (left, centre, right) as a 3-bit number; Life indexes the 3x3 block
/// row-major with the top-left cell as the most significant bit.
struct CaRule {
  CaKind kind = CaKind::elementary;
  Bits table;

  std::size_t arity() const { return kind == CaKind::elementary ? 3 : 9; }
  bool operator==(const CaRule&) const = default;
};

CaRule rule_truth_table(int rule_number);
CaRule life_rule();

// Periodic elementary step; rejects non-binary cells.
Bits ca1d_step_exact(std::span<const std::uint8_t> row, const CaRule& rule);
// Periodic B3/S23 step on an h x w grid; rejects non-binary cells.
Bits gol_step_exact(std::span<const std::uint8_t> grid, std::size_t h, std::size_t w);

// Snapshots 0..steps.
std::vector<Bits> ca1d_rollout_exact(const Bits& row, const CaRule& rule, std::size_t steps);
std::vector<Bits> gol_rollout_exact(const Bits& grid, std::size_t h, std::size_t w, std::size_t steps);

Bits random_bits(std::size_t n, double density, Rng& rng);
Tensor bits_to_tensor(const Bits& bits, Shape shape);
// Throws std::invalid_argument if any entry is not exactly 0 or 1.
Bits tensor_to_bits(const Tensor& t);

struct CaTrainConfig {
  std::vector<std::size_t> hidden{16, 16};
  double lr = 1e-2;
  std::size_t epochs = 500;
  // Teacher-forced pairs come from `initial_states` random states, each
  // stepped `steps` times by the exact rule.
  std::size_t initial_states = 64;
  std::size_t steps = 8;
  std::size_t height = 1;
  std::size_t width = 32;
  std::uint64_t seed = 0;

  static CaTrainConfig elementary_defaults();
  static CaTrainConfig life_defaults();
};

struct CaController {
  CaKind kind = CaKind::elementary;
  ParamSet params;
  Mlp mlp;

  // patches [rows, arity] -> logits [rows, 1]
  Tensor logits(const Tensor& patches) const { return mlp.forward(params, patches); }
};

struct CaTrainReport {
  CaController controller;
  double final_loss = 0.0;
  std::size_t pairs = 0;
  std::size_t distinct_neighbourhoods = 0;
  std::size_t table_mismatches = 0;
  bool converged() const { return table_mismatches == 0; }
};

/// Fits an MLP controller to the rule by per-cell binary cross-entropy on
/// teacher-forced one-step targets. Identical neighbourhoods are merged with
/// their counts as weights, which leaves the full-batch loss unchanged.
/// Throws if the generated pairs miss any neighbourhood configuration.
CaTrainReport train_ca_controller(const CaRule& rule, const CaTrainConfig& cfg);

/// Binary rollout: STE read, dense neighbourhoods, controller, sigmoid, STE write.
RolloutTrace nftm_ca_rollout(const CaController& controller, const FieldGrid& f0, std::size_t steps);

// Evaluates the controller on every configuration and binarises.
CaRule extract_learned_table(const CaController& controller);

// Space-time image of a 1D trace: [steps + 1, width].
Tensor trace_image(const RolloutTrace& trace);
Tensor trace_image(const std::vector<Bits>& rows);

}  // namespace nftm
