#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "nftm/nn.hpp"
#include "nftm/optim.hpp"
#include "nftm/tensor.hpp"

namespace nftm {

inline constexpr double kCflLimit = 0.25;

// Throws std::invalid_argument unless 0 <= alpha <= 0.25 everywhere.
void check_cfl(std::span<const double> alpha);

// u' = u + alpha * laplacian5(u) on an h x w grid, replicate edges.
// alpha holds 1 or h*w entries.
std::vector<double> heat_step_exact(std::span<const double> u, std::span<const double> alpha, std::size_t h,
                                    std::size_t w);

// 0.05 everywhere except a centred square of side h/4 at 0.15, smoothed by
// three stride-1 replicate-padded 3x3 average pools. Needs h, w >= 16.
std::vector<double> make_variable_alpha(std::size_t h, std::size_t w);

struct HeatDataset {
  std::size_t height = 0, width = 0;
  std::vector<double> alpha;  // 1 or height*width entries
  // sequences[n][t] is frame t (height*width values), t = 0..T.
  std::vector<std::vector<std::vector<double>>> sequences;

  std::size_t cells() const { return height * width; }
  std::size_t frames() const { return sequences.empty() ? 0 : sequences[0].size(); }
};

struct HeatDataOptions {
  std::size_t bumps_min = 4, bumps_max = 10;
  double width_min = 2.0, width_max = 6.0;
  // Gaussian noise added to the stored frames after simulation (0 = none).
  double noise_std = 0.0;
};

// Seeded sums of Gaussian bumps evolved `steps` times by heat_step_exact.
HeatDataset gen_heat_dataset(std::span<const double> alpha, std::size_t sequences, std::size_t h, std::size_t w,
                             std::size_t steps, std::uint64_t seed, const HeatDataOptions& opt = {});

struct HeteroOptions {
  double beta = 1.0;
  double gamma = 0.0;
};

/// Heteroscedastic Gaussian NLL on the update, averaged over sites:
///   mean_i w_i [ (delta_i - alpha_i lap_i)^2 / (2 exp(s_i)) + beta/2 s_i ]
/// with w = |lap|^gamma normalised to mean 1. alpha and s hold 1 entry
/// (global), `cells` entries (site i uses i % cells) or one per site.
/// Priors are not included.
Tensor hetero_nll(const Tensor& alpha, const Tensor& s, std::span<const double> delta, std::span<const double> lap,
                  std::size_t cells, const HeteroOptions& opt = {});

enum class AlphaModelKind { global, spatial };
enum class AlphaInputs { coords, u_coords };
AlphaModelKind parse_alpha_model(std::string_view s);
AlphaInputs parse_alpha_inputs(std::string_view s);

struct PdeTrainConfig {
  AlphaModelKind model = AlphaModelKind::global;
  AlphaInputs inputs = AlphaInputs::coords;
  double beta = 1.0;
  double gamma = 0.0;
  // false fixes sigma^2 = 1 (s = 0) and drops the s prior.
  bool learn_variance = true;
  double lambda_alpha = 1e-6;
  double lambda_s = 1e-4;
  double lambda_tv_alpha = 1e-4;
  double lr = 1e-2;
  // Per-site NLL gradients are tiny (~1e-8); a small epsilon keeps Adam's
  // step scale-free.
  double adam_eps = 1e-15;
  // Phase A cosine-decays the learning rate to lr * lr_final_fraction.
  double lr_final_fraction = 0.01;
  std::size_t epochs_a = 400;
  std::size_t epochs_b = 30;
  double lr_b = 1e-3;
  std::size_t rollout_steps = 10;
  std::size_t batch_sequences_b = 4;
  // u_coords only: sites sampled per phase-A epoch.
  std::size_t batch_sites = 16384;
  double init_alpha = 0.1;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t fourier_frequencies = 8;
  std::uint64_t seed = 0;
};

/// alpha (and log-variance s) as functions of position, and optionally of u.
struct HeatModel {
  AlphaModelKind kind = AlphaModelKind::global;
  AlphaInputs inputs = AlphaInputs::coords;
  std::size_t height = 0, width = 0;
  std::size_t fourier_frequencies = 0;
  ParamSet params;
  Mlp mlp;

  struct Fields {
    Tensor raw_alpha;
    Tensor s;
  };

  static HeatModel build(const PdeTrainConfig& cfg, std::size_t h, std::size_t w);

  // Global: [1]. Coordinates only: [cells]. u_coords: one per entry of u.
  Fields fields(const Tensor* u = nullptr) const;
  // alpha = softplus(raw) in the same layout.
  Tensor alpha(const Tensor* u = nullptr) const;
  // Per-cell alpha values; u_coords models are evaluated at u = u_ref.
  std::vector<double> alpha_map(double u_ref = 0.0) const;
  // One differentiable step for fields u of shape [N, H, W].
  Tensor step(const Tensor& u) const;
};

// Position features of every cell: [cells, 2 + 4K] (x, y in [-1, 1] plus
// sin/cos of k pi x and k pi y for k = 1..K).
Tensor coordinate_features(std::size_t h, std::size_t w, std::size_t frequencies);

struct PhaseReport {
  std::vector<double> losses;  // one per epoch
};

// Teacher-forced fit of the NLL over all transition pairs. An untrained
// model first has its log-variance set to log(mean squared update).
PhaseReport train_phase_a(const HeatDataset& data, HeatModel& model, const PdeTrainConfig& cfg);
// Fine-tunes on the MSE of the model's own `rollout_steps`-step unroll.
PhaseReport train_phase_b(const HeatDataset& data, HeatModel& model, const PdeTrainConfig& cfg);

struct AlphaError {
  double mae = 0.0;
  double max_abs = 0.0;
};
// A single-entry map broadcasts against the other.
AlphaError eval_alpha(std::span<const double> estimate, std::span<const double> truth);

// PSNR at steps 1..T of the model's rollout from gt[0]; peak is the value
// range of the ground-truth trace.
std::vector<double> rollout_psnr(const HeatModel& model, const std::vector<std::vector<double>>& gt, std::size_t steps);
// Same with a fixed alpha map run through heat_step_exact.
std::vector<double> rollout_psnr(std::span<const double> alpha, std::size_t h, std::size_t w,
                                 const std::vector<std::vector<double>>& gt, std::size_t steps);

// One-step teacher-forced MSE of the model over the dataset.
double one_step_mse(const HeatModel& model, const HeatDataset& data);

}  // namespace nftm
