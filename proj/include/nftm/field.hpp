#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "nftm/kernels.hpp"
#include "nftm/ops.hpp"
#include "nftm/tensor.hpp"

namespace nftm {

enum class Support { ball, box };
enum class HeadLayout { dense, explicit_list };
enum class UpdateMode { direct_write, attention_kernel };

/// A discretised field: 1D row [N], or 2D grid [H,W] / [C,H,W], together
/// with the boundary rule every neighbourhood read goes through.
struct FieldGrid {
  Tensor data;
  Boundary boundary = Boundary::periodic;

  static FieldGrid line(std::vector<double> values, Boundary b);
  static FieldGrid grid(Tensor data, Boundary b);

  bool two_d() const { return data.rank() >= 2; }
  std::size_t channels() const { return data.rank() == 3 ? data.dim(0) : 1; }
  std::size_t height() const { return two_d() ? data.dim(data.rank() - 2) : 1; }
  std::size_t width() const { return data.dim(data.rank() - 1); }
  std::size_t cells() const { return height() * width(); }
  // Spatial extent per axis: {N} or {H, W}.
  std::vector<std::size_t> extent() const;

  FieldGrid with_data(Tensor next) const;
};

/// Read/write locus: continuous position in cell units (x for 1D, (y, x) for
/// 2D), support radius in cells, and support shape.
struct Head {
  std::vector<double> position;
  double radius = 1.0;
  Support shape = Support::box;
};

struct RolloutTrace {
  std::vector<FieldGrid> fields;
  // head_tracks[h][t] is the position of head h before step t (t = 0..T).
  std::vector<std::vector<std::vector<double>>> head_tracks;

  std::size_t steps() const { return fields.empty() ? 0 : fields.size() - 1; }
};

// Support offsets (dy, dx) for a shape and radius; 1D fields use dy = 0.
std::vector<kernels::Offset2> support_offsets(Support shape, double radius, bool two_d);

// Values of the support around the head, bilinearly interpolated at
// fractional positions: [P] for single-channel fields, [C, P] otherwise.
Tensor read_patch(const FieldGrid& f, const Head& h);

// Every cell's neighbourhood: [C·cells, P] (rows grouped by channel).
Tensor read_all_patches(const FieldGrid& f, double radius, Support shape = Support::box);

// Writes one value per head (values [heads] or [heads, C]) to the nearest
// cell, or one support patch per head (values [heads, P], single channel).
// Cells hit by several writes receive their average; others keep f.
FieldGrid scatter_write(const FieldGrid& f, std::span<const Head> heads, const Tensor& values);

// f'(x) = g(sum_j A[x, j] f(x + offset_j)) using A of shape [cells, P] (shared
// across channels) or [C·cells, P]. All reads come from the snapshot f.
FieldGrid attention_update(const FieldGrid& f, const Tensor& kernel_weights, Pointwise g, double radius,
                           Support shape = Support::box);

// h + delta, clamped into [0, extent) per axis. deltas is [heads, dims].
std::vector<Head> move_heads(std::span<const Head> heads, const Tensor& deltas,
                             std::span<const std::size_t> extent, HeadLayout layout);

// One head per cell at integer positions.
std::vector<Head> dense_heads(const FieldGrid& f, double radius, Support shape);

struct ControllerOutput {
  // direct_write: new values, one per cell (dense) or per head (explicit).
  // attention_kernel: kernel weights [rows, P].
  Tensor update;
  // Optional [heads, dims]; must be zero for the dense layout.
  Tensor head_deltas;
};

struct MachineSpec {
  // Maps the read patches ([rows, P] or [heads, C·P]) of step t to outputs.
  std::function<ControllerOutput(const Tensor& patches, std::size_t step)> controller;
  UpdateMode mode = UpdateMode::direct_write;
  Pointwise g = Pointwise::identity;
  HeadLayout layout = HeadLayout::dense;
  double radius = 1.0;
  Support support = Support::box;
  // Applied to the field before reading (e.g. STE binarisation).
  std::function<Tensor(const Tensor&)> read_transform;
  // Applied to the new field data after g (e.g. STE binarisation).
  std::function<Tensor(const Tensor&)> write_transform;
};

// Post-step hook: may record or replace the new snapshot (e.g. clamp known pixels).
using StepHook = std::function<FieldGrid(std::size_t step, const FieldGrid& next)>;

/// Iterates read -> controller -> write -> move for `steps` steps from f0.
/// Step t+1 reads only snapshot t. Explicit-layout machines take their
/// initial heads in `heads`.
RolloutTrace rollout(const MachineSpec& machine, const FieldGrid& f0, std::size_t steps,
                     const StepHook& hook = {}, std::vector<Head> heads = {});

inline constexpr double kPsnrCap = 99.0;

// 10 log10(peak^2 / MSE), capped at kPsnrCap (also returned for MSE = 0).
double psnr(const Tensor& a, const Tensor& b, double peak);
double psnr(std::span<const double> a, std::span<const double> b, double peak);

// Per-cell kernel weights that make attention_update one explicit heat step
// over the 3x3 box support: centre 1 - 4 alpha, axis neighbours alpha.
// alpha holds 1 or cells entries.
std::vector<double> diffusion_kernel_weights(std::span<const double> alpha, std::size_t cells);

}  // namespace nftm
