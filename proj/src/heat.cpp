#include "nftm/heat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "nftm/field.hpp"
#include "nftm/kernels.hpp"

namespace nftm {

namespace {

double softplus_inverse(double a) { return a > 30.0 ? a : std::log(std::expm1(a)); }

// Column j of a [rows, cols] tensor, as [rows].
Tensor column(const Tensor& x, std::size_t j) {
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  SparseMap map;
  map.out_shape = {rows};
  for (std::size_t r = 0; r < rows; ++r) {
    map.push(r * cols + j, 1.0);
    map.end_row();
  }
  return linear_map(x, map);
}

// Rows [u_i, features(cell_i)] for the u_coords model. u stays differentiable.
Tensor u_coord_rows(const Tensor& u_flat, const Tensor& feats, std::span<const std::size_t> cell_of_row) {
  const std::size_t rows = cell_of_row.size(), f = feats.dim(1);
  const std::size_t offset = u_flat.numel();
  SparseMap map;
  map.out_shape = {rows, f + 1};
  for (std::size_t r = 0; r < rows; ++r) {
    map.push(r, 1.0);
    map.end_row();
    for (std::size_t j = 0; j < f; ++j) {
      map.push(offset + cell_of_row[r] * f + j, 1.0);
      map.end_row();
    }
  }
  return linear_map(concat({u_flat, reshape(feats, {feats.numel()})}), map);
}

double cosine_lr(double lr, double final_fraction, std::size_t epoch, std::size_t epochs) {
  if (epochs <= 1) return lr;
  const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  const double lo = lr * final_fraction;
  return lo + (lr - lo) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

Tensor frames_tensor(const std::vector<std::vector<double>>& seq, std::size_t t0, std::size_t count, std::size_t h,
                     std::size_t w) {
  std::vector<double> v;
  v.reserve(count * h * w);
  for (std::size_t t = t0; t < t0 + count; ++t) v.insert(v.end(), seq[t].begin(), seq[t].end());
  return Tensor({count, h, w}, std::move(v));
}

}  // namespace

void check_cfl(std::span<const double> alpha) {
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] >= 0.0 && alpha[i] <= kCflLimit)) {
      throw std::invalid_argument("alpha[" + std::to_string(i) + "] = " + std::to_string(alpha[i]) +
                                  " violates the stability limit 0 <= alpha <= 0.25");
    }
  }
}

std::vector<double> heat_step_exact(std::span<const double> u, std::span<const double> alpha, std::size_t h,
                                    std::size_t w) {
  if (u.size() != h * w) {
    throw std::invalid_argument("heat_step_exact: field has " + std::to_string(u.size()) + " cells, expected " +
                                std::to_string(h * w));
  }
  if (alpha.size() != 1 && alpha.size() != h * w) {
    throw std::invalid_argument("heat_step_exact: alpha needs 1 or " + std::to_string(h * w) + " entries");
  }
  check_cfl(alpha);
  std::vector<double> out(u.size());
  kernels::heat_step_omp(u, alpha, 1, h, w, out);
  return out;
}

std::vector<double> make_variable_alpha(std::size_t h, std::size_t w) {
  if (h < 16 || w < 16) throw std::invalid_argument("make_variable_alpha needs a grid of at least 16x16");
  const std::size_t side = h / 4;
  const std::size_t r0 = (h - side) / 2, c0 = (w - side) / 2;
  std::vector<double> a(h * w, 0.05);
  for (std::size_t i = r0; i < r0 + side; ++i) {
    for (std::size_t j = c0; j < c0 + side; ++j) a[i * w + j] = 0.15;
  }
  std::vector<double> next(a.size());
  for (int pass = 0; pass < 3; ++pass) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        double s = 0.0;
        for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
          for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
            const auto y = resolve_index(static_cast<std::ptrdiff_t>(i) + dy, static_cast<std::ptrdiff_t>(h),
                                         Boundary::replicate);
            const auto x = resolve_index(static_cast<std::ptrdiff_t>(j) + dx, static_cast<std::ptrdiff_t>(w),
                                         Boundary::replicate);
            s += a[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
          }
        }
        next[i * w + j] = s / 9.0;
      }
    }
    a.swap(next);
  }
  return a;
}

HeatDataset gen_heat_dataset(std::span<const double> alpha, std::size_t sequences, std::size_t h, std::size_t w,
                             std::size_t steps, std::uint64_t seed, const HeatDataOptions& opt) {
  if (alpha.size() != 1 && alpha.size() != h * w) {
    throw std::invalid_argument("gen_heat_dataset: alpha needs 1 or " + std::to_string(h * w) + " entries");
  }
  if (opt.bumps_min == 0 || opt.bumps_max < opt.bumps_min) throw std::invalid_argument("bad bump count range");
  check_cfl(alpha);
  HeatDataset d;
  d.height = h;
  d.width = w;
  d.alpha.assign(alpha.begin(), alpha.end());
  d.sequences.resize(sequences);
  Rng rng(seed);
  for (auto& seq : d.sequences) {
    std::vector<double> u(h * w, 0.0);
    const std::size_t bumps = opt.bumps_min + rng.below(opt.bumps_max - opt.bumps_min + 1);
    for (std::size_t b = 0; b < bumps; ++b) {
      const double cy = rng.uniform(0.0, static_cast<double>(h));
      const double cx = rng.uniform(0.0, static_cast<double>(w));
      const double sd = rng.uniform(opt.width_min, opt.width_max);
      const double amp = rng.uniform(0.2, 1.0);
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          const double dy = static_cast<double>(i) - cy, dx = static_cast<double>(j) - cx;
          u[i * w + j] += amp * std::exp(-(dy * dy + dx * dx) / (2.0 * sd * sd));
        }
      }
    }
    seq.push_back(u);
  }
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(sequences); ++n) {
    auto& seq = d.sequences[static_cast<std::size_t>(n)];
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<double> next(h * w);
      kernels::heat_step_serial(seq.back(), alpha, 1, h, w, next);
      seq.push_back(std::move(next));
    }
  }
  if (opt.noise_std > 0.0) {
    Rng noise(seed ^ 0xd1b54a32d192ed03ull);
    for (auto& seq : d.sequences) {
      for (auto& frame : seq) {
        for (auto& v : frame) v += noise.normal(0.0, opt.noise_std);
      }
    }
  }
  return d;
}

Tensor hetero_nll(const Tensor& alpha, const Tensor& s, std::span<const double> delta, std::span<const double> lap,
                  std::size_t cells, const HeteroOptions& opt) {
  const std::size_t m = delta.size();
  if (lap.size() != m || m == 0 || cells == 0 || m % cells != 0) {
    throw std::invalid_argument("hetero_nll: " + std::to_string(m) + " updates, " + std::to_string(lap.size()) +
                                " Laplacian values, " + std::to_string(cells) + " cells");
  }
  auto layout = [&](const Tensor& t, const char* name) {
    const std::size_t n = t.numel();
    if (n != 1 && n != cells && n != m) {
      throw std::invalid_argument(std::string("hetero_nll: ") + name + " has " + std::to_string(n) +
                                  " entries; expected 1, " + std::to_string(cells) + " or " + std::to_string(m));
    }
    return n;
  };
  const std::size_t na = layout(alpha, "alpha"), ns = layout(s, "s");
  auto idx = [&](std::size_t n, std::size_t i) { return n == 1 ? 0 : (n == cells ? i % cells : i); };

  std::vector<double> w;
  if (opt.gamma != 0.0) {
    w.resize(m);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += w[i] = std::pow(std::fabs(lap[i]), opt.gamma);
    const double scale = total > 0.0 ? static_cast<double>(m) / total : 0.0;
    if (scale == 0.0) {
      std::fill(w.begin(), w.end(), 1.0);
    } else {
      for (auto& v : w) v *= scale;
    }
  }

  auto av = alpha.values(), sv = s.values();
  auto ga = std::make_shared<std::vector<double>>(na, 0.0);
  auto gs = std::make_shared<std::vector<double>>(ns, 0.0);
  const double inv_m = 1.0 / static_cast<double>(m);
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t ia = idx(na, i), is = idx(ns, i);
    const double wi = w.empty() ? 1.0 : w[i];
    const double inv_var = std::exp(-sv[is]);
    const double r = delta[i] - av[ia] * lap[i];
    const double half_r2 = 0.5 * r * r * inv_var;
    acc += wi * (half_r2 + 0.5 * opt.beta * sv[is]);
    (*ga)[ia] -= wi * r * lap[i] * inv_var * inv_m;
    (*gs)[is] += wi * (0.5 * opt.beta - half_r2) * inv_m;
  }
  return Tensor::make_result(
      {1}, {acc * inv_m}, {alpha, s},
      [ga, gs](detail::Node& self) {
        const double g = self.grad[0];
        if (auto& p = *self.parents[0]; wants_grad(p)) {
          auto d = grad_of(p);
          for (std::size_t k = 0; k < d.size(); ++k) d[k] += g * (*ga)[k];
        }
        if (auto& p = *self.parents[1]; wants_grad(p)) {
          auto d = grad_of(p);
          for (std::size_t k = 0; k < d.size(); ++k) d[k] += g * (*gs)[k];
        }
      },
      "hetero_nll");
}

AlphaModelKind parse_alpha_model(std::string_view s) {
  if (s == "global") return AlphaModelKind::global;
  if (s == "spatial") return AlphaModelKind::spatial;
  throw std::invalid_argument("unknown alpha model '" + std::string(s) + "' (expected global or spatial)");
}

AlphaInputs parse_alpha_inputs(std::string_view s) {
  if (s == "coords") return AlphaInputs::coords;
  if (s == "u_coords") return AlphaInputs::u_coords;
  throw std::invalid_argument("unknown alpha inputs '" + std::string(s) + "' (expected coords or u_coords)");
}

Tensor coordinate_features(std::size_t h, std::size_t w, std::size_t frequencies) {
  const std::size_t f = 2 + 4 * frequencies;
  std::vector<double> v(h * w * f);
  auto norm = [](std::size_t i, std::size_t n) {
    return n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double* row = v.data() + (i * w + j) * f;
      const double y = norm(i, h), x = norm(j, w);
      row[0] = x;
      row[1] = y;
      for (std::size_t k = 1; k <= frequencies; ++k) {
        const double kp = static_cast<double>(k) * std::numbers::pi;
        double* r = row + 2 + 4 * (k - 1);
        r[0] = std::sin(kp * x);
        r[1] = std::cos(kp * x);
        r[2] = std::sin(kp * y);
        r[3] = std::cos(kp * y);
      }
    }
  }
  return Tensor({h * w, f}, std::move(v));
}

HeatModel HeatModel::build(const PdeTrainConfig& cfg, std::size_t h, std::size_t w) {
  if (!(cfg.init_alpha > 0.0)) throw std::invalid_argument("init_alpha must be positive");
  HeatModel m;
  m.kind = cfg.model;
  m.inputs = cfg.inputs;
  m.height = h;
  m.width = w;
  m.fourier_frequencies = cfg.fourier_frequencies;
  const double raw0 = softplus_inverse(cfg.init_alpha);
  if (cfg.model == AlphaModelKind::global) {
    m.params.add("alpha.raw", Tensor({1}, {raw0}));
    m.params.add("alpha.s", Tensor({1}, {0.0}));
    return m;
  }
  Rng rng(cfg.seed);
  std::vector<std::size_t> sizes{2 + 4 * cfg.fourier_frequencies + (cfg.inputs == AlphaInputs::u_coords ? 1 : 0)};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(2);
  m.mlp = Mlp::build(m.params, "alpha", sizes, Pointwise::tanh, rng);
  // Start from the uniform map init_alpha with unit variance.
  auto last = m.params.get("alpha.b" + std::to_string(sizes.size() - 2)).values_mut();
  last[0] = raw0;
  last[1] = 0.0;
  return m;
}

HeatModel::Fields HeatModel::fields(const Tensor* u) const {
  if (kind == AlphaModelKind::global) return {params.get("alpha.raw"), params.get("alpha.s")};
  Tensor feats = coordinate_features(height, width, fourier_frequencies);
  Tensor out;
  if (inputs == AlphaInputs::coords) {
    out = mlp.forward(params, feats);
  } else {
    if (u == nullptr || u->numel() % (height * width) != 0) {
      throw std::invalid_argument("u_coords alpha model needs the field u");
    }
    std::vector<std::size_t> cell(u->numel());
    for (std::size_t i = 0; i < cell.size(); ++i) cell[i] = i % (height * width);
    out = mlp.forward(params, u_coord_rows(reshape(*u, {u->numel()}), feats, cell));
  }
  return {column(out, 0), column(out, 1)};
}

Tensor HeatModel::alpha(const Tensor* u) const { return softplus(fields(u).raw_alpha); }

std::vector<double> HeatModel::alpha_map(double u_ref) const {
  Tensor a;
  if (kind == AlphaModelKind::spatial && inputs == AlphaInputs::u_coords) {
    Tensor u = Tensor::full({height, width}, u_ref);
    a = alpha(&u);
  } else {
    a = alpha();
  }
  return {a.values().begin(), a.values().end()};
}

Tensor HeatModel::step(const Tensor& u) const {
  if (u.rank() != 3 || u.dim(1) != height || u.dim(2) != width) {
    throw std::invalid_argument("HeatModel::step expects [N," + std::to_string(height) + "," + std::to_string(width) +
                                "], got " + shape_str(u.shape()));
  }
  Tensor a = alpha(&u);
  if (a.numel() == height * width) a = reshape(a, {height, width});
  a = a.numel() == u.numel() ? reshape(a, u.shape()) : broadcast_to(a, u.shape());
  return add(u, mul(a, laplacian5(u)));
}

PhaseReport train_phase_a(const HeatDataset& data, HeatModel& model, const PdeTrainConfig& cfg) {
  if (data.sequences.empty() || data.frames() < 2) throw std::invalid_argument("phase A needs at least one transition");
  if (data.height != model.height || data.width != model.width) {
    throw std::invalid_argument("dataset grid does not match the model grid");
  }
  const std::size_t cells = data.cells(), h = data.height, w = data.width;
  const std::size_t pairs = data.sequences.size() * (data.frames() - 1);
  std::vector<double> delta(pairs * cells), lap(pairs * cells), u_site(pairs * cells);
  std::size_t p = 0;
  for (const auto& seq : data.sequences) {
    for (std::size_t t = 0; t + 1 < seq.size(); ++t, ++p) {
      std::span<double> l(lap.data() + p * cells, cells);
      kernels::laplacian5_serial(seq[t], 1, h, w, l);
      for (std::size_t c = 0; c < cells; ++c) {
        delta[p * cells + c] = seq[t + 1][c] - seq[t][c];
        u_site[p * cells + c] = seq[t][c];
      }
    }
  }

  // A fresh model starts its variance at the mean squared update, so the
  // data term outweighs the priors from the first epoch.
  if (model.params.step_count() == 0 && cfg.learn_variance) {
    double msq = 0.0;
    for (double v : delta) msq += v * v;
    msq /= static_cast<double>(delta.size());
    const double s0 = msq > 0.0 ? std::log(msq) : 0.0;
    if (model.kind == AlphaModelKind::global) {
      model.params.get("alpha.s").values_mut()[0] = s0;
    } else {
      model.params.get("alpha.b" + std::to_string(model.mlp.sizes.size() - 2)).values_mut()[1] = s0;
    }
  }

  const HeteroOptions opt{cfg.beta, cfg.gamma};
  const bool per_site = model.kind == AlphaModelKind::spatial && model.inputs == AlphaInputs::u_coords;
  Tensor feats;
  if (per_site) feats = coordinate_features(h, w, model.fourier_frequencies);
  Rng rng(cfg.seed ^ 0x5851f42d4c957f2dull);
  Adam adam;
  adam.eps = cfg.adam_eps;
  if (!cfg.learn_variance && model.kind == AlphaModelKind::global) adam.frozen = {"alpha.s"};
  const Tensor unit_variance = Tensor::zeros({1});
  PhaseReport rep;
  for (std::size_t e = 0; e < cfg.epochs_a; ++e) {
    adam.lr = cosine_lr(cfg.lr, cfg.lr_final_fraction, e, cfg.epochs_a);
    try {
      HeatModel::Fields f;
      Tensor nll;
      if (per_site) {
        const std::size_t b = std::min(cfg.batch_sites, delta.size());
        std::vector<double> ub(b), db(b), lb(b);
        std::vector<std::size_t> cell(b);
        for (std::size_t k = 0; k < b; ++k) {
          const std::size_t i = rng.below(delta.size());
          ub[k] = u_site[i];
          db[k] = delta[i];
          lb[k] = lap[i];
          cell[k] = i % cells;
        }
        Tensor out = model.mlp.forward(model.params, u_coord_rows(Tensor({b}, ub), feats, cell));
        f = {column(out, 0), column(out, 1)};
        if (!cfg.learn_variance) f.s = unit_variance;
        nll = hetero_nll(softplus(f.raw_alpha), f.s, db, lb, b, opt);
      } else {
        f = model.fields();
        if (!cfg.learn_variance) f.s = unit_variance;
        nll = hetero_nll(softplus(f.raw_alpha), f.s, delta, lap, cells, opt);
      }
      Tensor loss = add(nll, scale(mean(square(f.raw_alpha)), cfg.lambda_alpha));
      if (cfg.learn_variance) loss = add(loss, scale(mean(square(f.s)), cfg.lambda_s));
      loss.backward();
      adam.step(model.params);
      rep.losses.push_back(loss.item());
    } catch (const std::domain_error& err) {
      throw std::runtime_error("phase A diverged at epoch " + std::to_string(e) + ": " + err.what());
    }
  }
  return rep;
}

PhaseReport train_phase_b(const HeatDataset& data, HeatModel& model, const PdeTrainConfig& cfg) {
  if (cfg.rollout_steps == 0) throw std::invalid_argument("phase B needs rollout_steps >= 1");
  if (data.frames() < cfg.rollout_steps + 1) {
    throw std::invalid_argument("phase B rollout of " + std::to_string(cfg.rollout_steps) + " steps needs " +
                                std::to_string(cfg.rollout_steps + 1) + " frames per sequence");
  }
  const std::size_t h = data.height, w = data.width, n = data.sequences.size();
  const std::size_t batch = std::min(std::max<std::size_t>(cfg.batch_sequences_b, 1), n);
  const std::size_t T = cfg.rollout_steps;
  Adam adam;
  adam.lr = cfg.lr_b;
  adam.eps = cfg.adam_eps;
  // The rollout loss does not involve the variance.
  if (model.kind == AlphaModelKind::global) adam.frozen = {"alpha.s"};
  PhaseReport rep;
  for (std::size_t e = 0; e < cfg.epochs_b; ++e) {
    try {
      std::vector<double> u0, targets;
      for (std::size_t b = 0; b < batch; ++b) {
        const auto& seq = data.sequences[(e * batch + b) % n];
        u0.insert(u0.end(), seq[0].begin(), seq[0].end());
      }
      Tensor u({batch, h, w}, u0);
      Tensor loss = Tensor::zeros({1});
      for (std::size_t t = 1; t <= T; ++t) {
        u = model.step(u);
        std::vector<double> gt;
        gt.reserve(batch * h * w);
        for (std::size_t b = 0; b < batch; ++b) {
          const auto& f = data.sequences[(e * batch + b) % n][t];
          gt.insert(gt.end(), f.begin(), f.end());
        }
        loss = add(loss, mean(square(sub(u, Tensor({batch, h, w}, std::move(gt))))));
      }
      loss = scale(loss, 1.0 / static_cast<double>(T));
      if (model.kind == AlphaModelKind::spatial) {
        Tensor a;
        if (model.inputs == AlphaInputs::u_coords) {
          Tensor uref = Tensor::zeros({h, w});
          a = model.alpha(&uref);
        } else {
          a = model.alpha();
        }
        loss = add(loss, scale(tv_l1(reshape(a, {h, w})), cfg.lambda_tv_alpha / static_cast<double>(h * w)));
      }
      loss.backward();
      adam.step(model.params);
      rep.losses.push_back(loss.item());
    } catch (const std::domain_error& err) {
      throw std::runtime_error("phase B diverged at epoch " + std::to_string(e) + ": " + err.what());
    }
  }
  return rep;
}

AlphaError eval_alpha(std::span<const double> estimate, std::span<const double> truth) {
  const std::size_t n = std::max(estimate.size(), truth.size());
  if (estimate.empty() || truth.empty() || (estimate.size() != truth.size() && estimate.size() != 1 && truth.size() != 1)) {
    throw std::invalid_argument("eval_alpha: " + std::to_string(estimate.size()) + " estimates vs " +
                                std::to_string(truth.size()) + " true values");
  }
  AlphaError err;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::fabs(estimate[estimate.size() == 1 ? 0 : i] - truth[truth.size() == 1 ? 0 : i]);
    err.mae += d;
    err.max_abs = std::max(err.max_abs, d);
  }
  err.mae /= static_cast<double>(n);
  return err;
}

namespace {

double trace_range(const std::vector<std::vector<double>>& gt, std::size_t steps) {
  double lo = gt[0][0], hi = gt[0][0];
  for (std::size_t t = 0; t <= steps; ++t) {
    for (double v : gt[t]) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return hi > lo ? hi - lo : 1.0;
}

}  // namespace

std::vector<double> rollout_psnr(std::span<const double> alpha, std::size_t h, std::size_t w,
                                 const std::vector<std::vector<double>>& gt, std::size_t steps) {
  if (gt.size() < steps + 1) {
    throw std::invalid_argument("rollout_psnr: trace has " + std::to_string(gt.size()) + " frames, need " +
                                std::to_string(steps + 1));
  }
  const double peak = trace_range(gt, steps);
  std::vector<double> out;
  std::vector<double> u = gt[0];
  for (std::size_t t = 1; t <= steps; ++t) {
    u = heat_step_exact(u, alpha, h, w);
    out.push_back(psnr(u, gt[t], peak));
  }
  return out;
}

std::vector<double> rollout_psnr(const HeatModel& model, const std::vector<std::vector<double>>& gt,
                                 std::size_t steps) {
  if (model.inputs == AlphaInputs::coords || model.kind == AlphaModelKind::global) {
    return rollout_psnr(model.alpha_map(), model.height, model.width, gt, steps);
  }
  if (gt.size() < steps + 1) throw std::invalid_argument("rollout_psnr: trace too short");
  const double peak = trace_range(gt, steps);
  std::vector<double> out;
  Tensor u({1, model.height, model.width}, gt[0]);
  for (std::size_t t = 1; t <= steps; ++t) {
    u = model.step(u).detach();
    out.push_back(psnr(u.values(), gt[t], peak));
  }
  return out;
}

double one_step_mse(const HeatModel& model, const HeatDataset& data) {
  const std::size_t h = data.height, w = data.width, T = data.frames() - 1;
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& seq : data.sequences) {
    Tensor next = model.step(frames_tensor(seq, 0, T, h, w));
    auto nv = next.values();
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t c = 0; c < h * w; ++c) {
        const double d = nv[t * h * w + c] - seq[t + 1][c];
        acc += d * d;
      }
    }
    count += T * h * w;
  }
  return acc / static_cast<double>(count);
}

}  // namespace nftm
