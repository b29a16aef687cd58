#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nftm/nn.hpp"
#include "nftm/optim.hpp"
#include "nftm/random.hpp"
#include "nftm/tensor.hpp"

namespace nftm {

enum class MaskKind { dropout, block, mixture };

struct MaskSpec {
  double fraction_lo = 0.25;
  double fraction_hi = 0.50;
  MaskKind kind = MaskKind::mixture;
  std::uint64_t seed = 0;
};

struct Mask {
  Tensor known;  // [H, W], 1 = known
  double target_fraction = 0.0;
  MaskKind kind = MaskKind::dropout;  // dropout or block

  double unknown_fraction() const;
};

// Unknown fraction drawn from [fraction_lo, fraction_hi]. Dropout removes
// exactly round(f * H * W) pixels; block removes 1-3 axis-aligned squares
// whose union lands within 0.05 of f. Throws if that cannot be met.
Mask make_mask(const MaskSpec& spec, std::size_t h, std::size_t w);

// M * gt + (1 - M) * clip(N(0, 0.5^2), -1, 1); gt is [3, H, W], mask [H, W].
Tensor corrupt(const Tensor& gt, const Tensor& mask, Rng& rng);

// 1/2 ||M (I - obs)||^2 + lambda_tv * tv_l1(I), differentiable in I.
Tensor energy(const Tensor& image, const Tensor& observed, const Tensor& mask, double lambda_tv);
// Same value computed without building a graph.
double energy_value(std::span<const double> image, std::span<const double> observed, std::span<const double> mask,
                    std::size_t h, std::size_t w, double lambda_tv);

struct InpaintConfig {
  double sigma = 1.0;
  double lambda_tv_loss = 0.02;
  double lambda_tv_energy = 0.02;
  double lambda_contract = 0.01;
  std::size_t k_start = 4, k_increment = 2, k_every = 5, k_max = 20;
  std::size_t k_eval = 30;
  double beta0 = 0.5, beta_final = 0.3;
  double clip0 = 0.5, clip_decay = 0.9;
  double backtrack = 0.5;
  std::size_t max_backtracks = 3;
  double lr = 3e-4;
  std::size_t hidden = 48;
  std::size_t conv_layers = 4;
  Pointwise activation = Pointwise::relu;
  std::size_t epochs = 45;
  // Samples drawn (without replacement) from the training set per epoch.
  std::size_t images_per_epoch = 300;
  std::size_t batch = 8;
  // Average the loss over every unrolled step instead of the last one only.
  bool loss_all_steps = true;
  std::uint64_t seed = 0;

  std::size_t k_at(std::size_t epoch) const;
  double beta_at(std::size_t epoch) const;
  double clip_at(std::size_t step) const;
};

struct InpaintSample {
  Tensor gt;    // [3, H, W] in [-1, 1]
  Tensor mask;  // [H, W]
  Tensor init;  // corrupted start image
};

// Seeded smooth colour images: a linear gradient background plus 3-6 soft
// elliptical blobs, values in [-1, 1].
std::vector<Tensor> make_blob_images(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed);
// Pairs each image with a seeded mask and corrupted start.
std::vector<InpaintSample> make_inpaint_set(const std::vector<Tensor>& images, const MaskSpec& spec,
                                            std::uint64_t seed);

struct ImageState {
  Tensor image;     // [3, H, W]
  Tensor observed;  // [3, H, W]
  Tensor mask;      // [1, H, W]
  Tensor mask3;     // mask repeated over channels
  // Step size of the next attempt; each rollout step restarts from base_beta.
  double beta = 0.5;
  double base_beta = 0.5;
  std::size_t step = 0;

  static ImageState start(const InpaintSample& s, double beta);
};

struct InpaintController {
  ParamSet params;
  ConvStack net;

  static InpaintController build(const InpaintConfig& cfg, Rng& rng);

  struct Output {
    Tensor delta;  // [3, H, W], |delta| <= clip
    Tensor gate;   // [3, H, W] (one channel repeated), in (0, 1)
  };
  // Input concat(I, M, M * obs); delta = clip * tanh(.), gate = sigmoid(.).
  Output forward(const ImageState& s, double clip) const;
};

struct UpdateResult {
  ImageState state;
  bool accepted = false;
  double energy_before = 0.0;
  double energy_after = 0.0;
};

// One guarded attempt: propose clamp_known(clamp(I + beta g delta, -1, 1)),
// accept if the energy does not rise, otherwise keep I and halve beta.
UpdateResult guarded_update(const ImageState& s, const Tensor& delta, const Tensor& gate, const InpaintConfig& cfg);

struct StepRecord {
  std::size_t attempts = 0;
  bool accepted = false;
  double energy = 0.0;  // energy after the step
};

// One rollout step: controller, then up to 1 + max_backtracks guarded
// attempts (or a single unconditional one with guard off). After the last
// rejection the step is a zero step.
ImageState inpaint_step(const InpaintController& ctl, const ImageState& s, const InpaintConfig& cfg, bool guard,
                        StepRecord* record = nullptr);

// Training loss of one sample rolled out `depth` steps with the guard on.
Tensor sample_loss(const InpaintController& ctl, const InpaintSample& sample, std::size_t depth, double beta,
                   const InpaintConfig& cfg, bool guard = true);

struct InpaintTrainReport {
  std::vector<double> epoch_mean_loss;
  std::vector<double> epoch_median_loss;
  std::vector<std::size_t> epoch_k;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss, std::size_t k)>;

InpaintTrainReport train_inpaint(InpaintController& ctl, const std::vector<InpaintSample>& data,
                                 const InpaintConfig& cfg, const EpochCallback& on_epoch = {});

struct EvalResult {
  std::vector<double> mean_psnr;                // steps 0..K (index 0 = corrupted input)
  std::vector<std::vector<double>> energies;    // per image, steps 0..K
  std::vector<std::vector<double>> psnr;        // per image, steps 0..K
};

// Rolls each sample K steps at fixed beta; PSNR on [0, 1]-remapped images.
EvalResult eval_rollout(const InpaintController& ctl, const std::vector<InpaintSample>& test, std::size_t k,
                        bool guard, double beta, const InpaintConfig& cfg);

// PSNR of two [-1, 1] images after mapping to [0, 1] (peak 1).
double image_psnr(const Tensor& a, const Tensor& b);

}  // namespace nftm
