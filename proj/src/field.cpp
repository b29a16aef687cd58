#include "nftm/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace nftm {

namespace {

using kernels::Offset2;

std::ptrdiff_t nearest_cell(double p) { return static_cast<std::ptrdiff_t>(std::floor(p + 0.5)); }

void check_position(const FieldGrid& f, const Head& h) {
  const auto ext = f.extent();
  if (h.position.size() != ext.size()) {
    throw std::invalid_argument("head has " + std::to_string(h.position.size()) + " coordinates but the field has " +
                                std::to_string(ext.size()) + " axes");
  }
  for (std::size_t a = 0; a < ext.size(); ++a) {
    const double p = h.position[a];
    if (!(p >= 0.0 && p < static_cast<double>(ext[a]))) {
      throw std::invalid_argument("head coordinate " + std::to_string(p) + " outside [0, " +
                                  std::to_string(ext[a]) + ")");
    }
  }
  if (h.radius < 0) throw std::invalid_argument("head radius must be non-negative");
}

// Appends the interpolation taps of location (py, px) on plane `c` to the map.
void push_bilinear(SparseMap& map, const FieldGrid& f, std::size_t c, double py, double px) {
  const auto H = static_cast<std::ptrdiff_t>(f.height());
  const auto W = static_cast<std::ptrdiff_t>(f.width());
  const double fy = std::floor(py), fx = std::floor(px);
  const double ty = py - fy, tx = px - fx;
  const auto y0 = static_cast<std::ptrdiff_t>(fy), x0 = static_cast<std::ptrdiff_t>(fx);
  const std::size_t base = c * f.cells();
  for (int dy = 0; dy < 2; ++dy) {
    const double wy = dy ? ty : 1.0 - ty;
    if (wy == 0.0) continue;
    const auto y = resolve_index(y0 + dy, H, f.boundary);
    for (int dx = 0; dx < 2; ++dx) {
      const double wx = dx ? tx : 1.0 - tx;
      if (wx == 0.0) continue;
      const auto x = resolve_index(x0 + dx, W, f.boundary);
      if (y < 0 || x < 0) continue;
      map.push(base + static_cast<std::size_t>(y * W + x), wy * wx);
    }
  }
}

}  // namespace

FieldGrid FieldGrid::line(std::vector<double> values, Boundary b) {
  const auto n = values.size();
  return FieldGrid{Tensor({n}, std::move(values)), b};
}

FieldGrid FieldGrid::grid(Tensor data, Boundary b) {
  if (data.rank() != 2 && data.rank() != 3) {
    throw std::invalid_argument("grid field needs [H,W] or [C,H,W] data, got " + shape_str(data.shape()));
  }
  return FieldGrid{std::move(data), b};
}

std::vector<std::size_t> FieldGrid::extent() const {
  if (two_d()) return {height(), width()};
  return {width()};
}

FieldGrid FieldGrid::with_data(Tensor next) const {
  if (next.shape() != data.shape()) {
    throw std::invalid_argument("field update changes shape " + shape_str(data.shape()) + " -> " +
                                shape_str(next.shape()));
  }
  return FieldGrid{std::move(next), boundary};
}

std::vector<Offset2> support_offsets(Support shape, double radius, bool two_d) {
  if (radius < 0) throw std::invalid_argument("support radius must be non-negative");
  if (shape == Support::ball) return kernels::ball_offsets(radius, two_d);
  return kernels::box_offsets(static_cast<std::size_t>(std::floor(radius)), two_d);
}

Tensor read_patch(const FieldGrid& f, const Head& h) {
  check_position(f, h);
  const bool two_d = f.two_d();
  const auto offs = support_offsets(h.shape, h.radius, two_d);
  const std::size_t P = offs.size(), C = f.channels();
  SparseMap map;
  map.out_shape = C == 1 ? Shape{P} : Shape{C, P};
  const double py = two_d ? h.position[0] : 0.0;
  const double px = two_d ? h.position[1] : h.position[0];
  for (std::size_t c = 0; c < C; ++c) {
    for (const auto& o : offs) {
      push_bilinear(map, f, c, py + static_cast<double>(o[0]), px + static_cast<double>(o[1]));
      map.end_row();
    }
  }
  return linear_map(f.data, map);
}

Tensor read_all_patches(const FieldGrid& f, double radius, Support shape) {
  const auto offs = support_offsets(shape, radius, f.two_d());
  return gather_neighborhoods(f.data, f.channels(), f.height(), f.width(), offs, f.boundary);
}

FieldGrid scatter_write(const FieldGrid& f, std::span<const Head> heads, const Tensor& values) {
  const std::size_t C = f.channels(), cells = f.cells(), total = C * cells;
  const std::size_t nh = heads.size();
  if (nh == 0) return f;
  const bool two_d = f.two_d();
  const auto H = static_cast<std::ptrdiff_t>(f.height());
  const auto W = static_cast<std::ptrdiff_t>(f.width());

  std::vector<Offset2> patch{{0, 0}};
  bool per_channel = values.numel() == nh * C;
  if (!per_channel) {
    patch = support_offsets(heads[0].shape, heads[0].radius, two_d);
    for (const auto& h : heads) {
      if (h.shape != heads[0].shape || h.radius != heads[0].radius) {
        throw std::invalid_argument("scatter_write: patch writes need every head to share its support");
      }
    }
    if (C != 1 || values.numel() != nh * patch.size()) {
      throw std::invalid_argument("scatter_write: " + std::to_string(values.numel()) + " values for " +
                                  std::to_string(nh) + " heads on a " + std::to_string(C) + "-channel field");
    }
  }

  // Inputs to the linear map are [f ; values]; entry total + k is values[k].
  std::vector<std::vector<std::size_t>> sources(total);
  for (std::size_t k = 0; k < nh; ++k) {
    check_position(f, heads[k]);
    const auto cy = two_d ? nearest_cell(heads[k].position[0]) : 0;
    const auto cx = nearest_cell(heads[k].position[two_d ? 1 : 0]);
    for (std::size_t p = 0; p < patch.size(); ++p) {
      const auto y = resolve_index(cy + patch[p][0], H, f.boundary);
      const auto x = resolve_index(cx + patch[p][1], W, f.boundary);
      if (y < 0 || x < 0) continue;
      const auto cell = static_cast<std::size_t>(y * W + x);
      if (per_channel) {
        for (std::size_t c = 0; c < C; ++c) sources[c * cells + cell].push_back(total + k * C + c);
      } else {
        sources[cell].push_back(total + k * patch.size() + p);
      }
    }
  }

  SparseMap map;
  map.out_shape = f.data.shape();
  for (std::size_t i = 0; i < total; ++i) {
    if (sources[i].empty()) {
      map.push(i, 1.0);
    } else {
      const double w = 1.0 / static_cast<double>(sources[i].size());
      for (auto s : sources[i]) map.push(s, w);
    }
    map.end_row();
  }
  Tensor joined = concat({reshape(f.data, {total}), reshape(values, {values.numel()})});
  return f.with_data(linear_map(joined, map));
}

FieldGrid attention_update(const FieldGrid& f, const Tensor& kernel_weights, Pointwise g, double radius,
                           Support shape) {
  const auto offs = support_offsets(shape, radius, f.two_d());
  const std::size_t P = offs.size(), C = f.channels(), cells = f.cells();
  if (kernel_weights.rank() != 2 || kernel_weights.dim(1) != P ||
      (kernel_weights.dim(0) != cells && kernel_weights.dim(0) != C * cells)) {
    throw std::invalid_argument("attention_update: kernel " + shape_str(kernel_weights.shape()) +
                                " does not fit a support of " + std::to_string(P) + " cells over " +
                                std::to_string(cells) + " cells x " + std::to_string(C) + " channels");
  }
  Tensor patches = gather_neighborhoods(f.data, C, f.height(), f.width(), offs, f.boundary);
  Tensor a = kernel_weights;
  if (C > 1 && kernel_weights.dim(0) == cells) {
    a = reshape(broadcast_to(reshape(kernel_weights, {1, cells, P}), {C, cells, P}), {C * cells, P});
  }
  Tensor mixed = pointwise(g, sum_last(mul(a, patches)));
  return f.with_data(reshape(mixed, f.data.shape()));
}

std::vector<Head> move_heads(std::span<const Head> heads, const Tensor& deltas,
                             std::span<const std::size_t> extent, HeadLayout layout) {
  const std::size_t dims = extent.size();
  if (deltas.numel() != heads.size() * dims) {
    throw std::invalid_argument("move_heads: " + std::to_string(deltas.numel()) + " deltas for " +
                                std::to_string(heads.size()) + " heads in " + std::to_string(dims) + "D");
  }
  auto d = deltas.values();
  if (layout == HeadLayout::dense) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d[i] != 0.0) {
        throw std::invalid_argument("move_heads: dense head layout cannot move (nonzero delta at index " +
                                    std::to_string(i) + ")");
      }
    }
  }
  std::vector<Head> out(heads.begin(), heads.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    for (std::size_t a = 0; a < dims; ++a) {
      const double hi = std::nextafter(static_cast<double>(extent[a]), 0.0);
      out[k].position[a] = std::clamp(out[k].position[a] + d[k * dims + a], 0.0, hi);
    }
  }
  return out;
}

std::vector<Head> dense_heads(const FieldGrid& f, double radius, Support shape) {
  std::vector<Head> heads;
  heads.reserve(f.cells());
  for (std::size_t i = 0; i < f.height(); ++i) {
    for (std::size_t j = 0; j < f.width(); ++j) {
      if (f.two_d()) {
        heads.push_back({{static_cast<double>(i), static_cast<double>(j)}, radius, shape});
      } else {
        heads.push_back({{static_cast<double>(j)}, radius, shape});
      }
    }
  }
  return heads;
}

namespace {

FieldGrid dense_step(const MachineSpec& m, const FieldGrid& f, std::size_t t) {
  const FieldGrid read = m.read_transform ? f.with_data(m.read_transform(f.data)) : f;
  Tensor patches = read_all_patches(read, m.radius, m.support);
  ControllerOutput out = m.controller(patches, t);
  if (out.head_deltas.defined()) {
    for (double v : out.head_deltas.values()) {
      if (v != 0.0) throw std::invalid_argument("dense head layout cannot move heads");
    }
  }
  Tensor next;
  if (m.mode == UpdateMode::direct_write) {
    if (out.update.numel() != f.data.numel()) {
      throw std::invalid_argument("controller wrote " + std::to_string(out.update.numel()) + " values into a field of " +
                                  std::to_string(f.data.numel()));
    }
    next = reshape(pointwise(m.g, out.update), f.data.shape());
  } else {
    next = attention_update(read, out.update, m.g, m.radius, m.support).data;
  }
  if (m.write_transform) next = m.write_transform(next);
  return f.with_data(next);
}

FieldGrid explicit_step(const MachineSpec& m, const FieldGrid& f, std::vector<Head>& heads, std::size_t t) {
  const FieldGrid read = m.read_transform ? f.with_data(m.read_transform(f.data)) : f;
  std::vector<Tensor> rows;
  rows.reserve(heads.size());
  for (const auto& h : heads) {
    Tensor p = read_patch(read, h);
    rows.push_back(reshape(p, {1, p.numel()}));
  }
  Tensor patches = concat(rows);
  ControllerOutput out = m.controller(patches, t);
  Tensor values;
  if (m.mode == UpdateMode::direct_write) {
    values = pointwise(m.g, out.update);
  } else {
    if (f.channels() != 1 || out.update.shape() != patches.shape()) {
      throw std::invalid_argument("attention_kernel with explicit heads needs [heads, P] weights on a 1-channel field");
    }
    values = pointwise(m.g, sum_last(mul(out.update, patches)));
  }
  Tensor next = scatter_write(f, heads, values).data;
  if (m.write_transform) next = m.write_transform(next);
  if (out.head_deltas.defined()) {
    const auto ext = f.extent();
    heads = move_heads(heads, out.head_deltas, ext, HeadLayout::explicit_list);
  }
  return f.with_data(next);
}

}  // namespace

RolloutTrace rollout(const MachineSpec& machine, const FieldGrid& f0, std::size_t steps, const StepHook& hook,
                     std::vector<Head> heads) {
  if (!machine.controller) throw std::invalid_argument("rollout: machine has no controller");
  if (machine.layout == HeadLayout::explicit_list && heads.empty()) {
    throw std::invalid_argument("rollout: explicit head layout needs initial heads");
  }
  RolloutTrace trace;
  trace.fields.reserve(steps + 1);
  trace.fields.push_back(f0);
  if (machine.layout == HeadLayout::explicit_list) {
    trace.head_tracks.resize(heads.size());
    for (std::size_t k = 0; k < heads.size(); ++k) trace.head_tracks[k].push_back(heads[k].position);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    const FieldGrid& cur = trace.fields.back();
    FieldGrid next;
    try {
      next = machine.layout == HeadLayout::dense ? dense_step(machine, cur, t) : explicit_step(machine, cur, heads, t);
      if (hook) next = hook(t, next);
    } catch (const std::domain_error& e) {
      throw std::runtime_error("rollout: non-finite value at step " + std::to_string(t + 1) + ": " + e.what());
    }
    trace.fields.push_back(std::move(next));
    for (std::size_t k = 0; k < trace.head_tracks.size(); ++k) trace.head_tracks[k].push_back(heads[k].position);
  }
  return trace;
}

double psnr(std::span<const double> a, std::span<const double> b, double peak) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("psnr: size mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (!(peak > 0)) throw std::invalid_argument("psnr: peak must be positive");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("psnr: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  return psnr(a.values(), b.values(), peak);
}

std::vector<double> diffusion_kernel_weights(std::span<const double> alpha, std::size_t cells) {
  std::vector<double> a(cells * 9, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    const double al = alpha.size() == 1 ? alpha[0] : alpha[c];
    double* row = a.data() + c * 9;
    row[1] = row[3] = row[5] = row[7] = al;
    row[4] = 1.0 - 4.0 * al;
  }
  return a;
}

}  // namespace nftm
