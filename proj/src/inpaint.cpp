#include "nftm/inpaint.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "nftm/field.hpp"
#include "nftm/kernels.hpp"
#include "nftm/ops.hpp"

namespace nftm {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

std::vector<double> block_mask(double f, std::size_t h, std::size_t w, Rng& rng) {
  const double n = static_cast<double>(h * w);
  for (int attempt = 0; attempt < 200; ++attempt) {
    // Fall back to a single square when several do not fit.
    const std::size_t count = attempt < 150 ? 1 + rng.below(3) : 1;
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(f * n / static_cast<double>(count))));
    if (side == 0 || side > std::min(h, w)) continue;
    std::vector<double> known(h * w, 1.0);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t y0 = rng.below(h - side + 1), x0 = rng.below(w - side + 1);
      for (std::size_t y = y0; y < y0 + side; ++y) {
        for (std::size_t x = x0; x < x0 + side; ++x) known[y * w + x] = 0.0;
      }
    }
    const double removed = 1.0 - std::accumulate(known.begin(), known.end(), 0.0) / n;
    if (std::fabs(removed - f) <= 0.05) return known;
  }
  throw std::invalid_argument("block mask: cannot remove a fraction " + std::to_string(f) + " of a " +
                              std::to_string(h) + "x" + std::to_string(w) + " image with 1-3 squares");
}

Tensor step_loss(const Tensor& image, const Tensor& prev, const Tensor& gt, const InpaintConfig& cfg) {
  const double n = static_cast<double>(image.numel());
  Tensor data = scale(mean(square(sub(image, gt))), 0.5 / (cfg.sigma * cfg.sigma));
  Tensor loss = add_scalar(data, std::log(cfg.sigma));
  loss = add(loss, scale(tv_l1(image), cfg.lambda_tv_loss / n));
  return add(loss, scale(mean(square(sub(image, prev))), cfg.lambda_contract));
}

template <class F>
void parallel_samples(std::size_t n, F&& body) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(nftm_inpaint_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

double Mask::unknown_fraction() const {
  auto v = known.values();
  return 1.0 - std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Mask make_mask(const MaskSpec& spec, std::size_t h, std::size_t w) {
  if (!(spec.fraction_lo > 0.0 && spec.fraction_lo <= spec.fraction_hi && spec.fraction_hi < 1.0)) {
    throw std::invalid_argument("mask fraction range [" + std::to_string(spec.fraction_lo) + ", " +
                                std::to_string(spec.fraction_hi) + "] must lie in (0, 1)");
  }
  if (h == 0 || w == 0) throw std::invalid_argument("mask needs a non-empty image");
  Rng rng(spec.seed);
  Mask m;
  m.target_fraction = rng.uniform(spec.fraction_lo, spec.fraction_hi);
  m.kind = spec.kind;
  if (spec.kind == MaskKind::mixture) m.kind = rng.coin() ? MaskKind::dropout : MaskKind::block;
  std::vector<double> known;
  if (m.kind == MaskKind::dropout) {
    const std::size_t n = h * w;
    const auto removed = static_cast<std::size_t>(std::lround(m.target_fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < removed; ++i) std::swap(order[i], order[i + rng.below(n - i)]);
    known.assign(n, 1.0);
    for (std::size_t i = 0; i < removed; ++i) known[order[i]] = 0.0;
  } else {
    known = block_mask(m.target_fraction, h, w, rng);
  }
  m.known = Tensor({h, w}, std::move(known));
  return m;
}

Tensor corrupt(const Tensor& gt, const Tensor& mask, Rng& rng) {
  if (gt.rank() != 3 || mask.rank() != 2 || gt.dim(1) != mask.dim(0) || gt.dim(2) != mask.dim(1)) {
    throw std::invalid_argument("corrupt: image " + shape_str(gt.shape()) + " and mask " + shape_str(mask.shape()) +
                                " disagree");
  }
  const std::size_t cells = mask.numel();
  auto g = gt.values();
  auto m = mask.values();
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double noise = std::clamp(rng.normal(0.0, 0.5), -1.0, 1.0);
    out[i] = m[i % cells] == 1.0 ? g[i] : noise;
  }
  return Tensor(gt.shape(), std::move(out));
}

Tensor energy(const Tensor& image, const Tensor& observed, const Tensor& mask, double lambda_tv) {
  Tensor m = mask.numel() == image.numel() ? reshape(mask, image.shape()) : broadcast_to(mask, image.shape());
  Tensor data = scale(sum(square(mul(m, sub(image, observed)))), 0.5);
  return add(data, scale(tv_l1(image), lambda_tv));
}

double energy_value(std::span<const double> image, std::span<const double> observed, std::span<const double> mask,
                    std::size_t h, std::size_t w, double lambda_tv) {
  const std::size_t cells = h * w;
  if (cells == 0 || image.size() % cells != 0 || observed.size() != image.size() ||
      (mask.size() != cells && mask.size() != image.size())) {
    throw std::invalid_argument("energy_value: inconsistent sizes");
  }
  double data = 0.0, tv = 0.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double r = mask[i % mask.size()] * (image[i] - observed[i]);
    data += r * r;
  }
  for (std::size_t p = 0; p < image.size() / cells; ++p) {
    const double* v = image.data() + p * cells;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        if (j + 1 < w) tv += std::fabs(v[i * w + j + 1] - v[i * w + j]);
        if (i + 1 < h) tv += std::fabs(v[(i + 1) * w + j] - v[i * w + j]);
      }
    }
  }
  return 0.5 * data + lambda_tv * tv;
}

std::size_t InpaintConfig::k_at(std::size_t epoch) const {
  const std::size_t every = std::max<std::size_t>(k_every, 1);
  return std::min(k_max, k_start + k_increment * (epoch / every));
}

double InpaintConfig::beta_at(std::size_t epoch) const {
  if (epochs <= 1) return beta_final;
  const double t = std::min(1.0, static_cast<double>(epoch) / static_cast<double>(epochs - 1));
  return beta0 + (beta_final - beta0) * t;
}

double InpaintConfig::clip_at(std::size_t step) const { return clip0 * std::pow(clip_decay, static_cast<double>(step)); }

std::vector<Tensor> make_blob_images(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> out;
  out.reserve(n);
  const double size = static_cast<double>(std::max(h, w));
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> img(3 * h * w);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double base[3], slope[3];
    for (int c = 0; c < 3; ++c) {
      base[c] = rng.uniform(-0.7, 0.7);
      slope[c] = rng.uniform(-0.5, 0.5);
    }
    for (int c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const double t = (static_cast<double>(x) * std::cos(theta) + static_cast<double>(y) * std::sin(theta)) / size;
          img[(static_cast<std::size_t>(c) * h + y) * w + x] = base[c] + slope[c] * t;
        }
      }
    }
    const std::size_t blobs = 3 + rng.below(4);
    for (std::size_t b = 0; b < blobs; ++b) {
      const double cy = rng.uniform(0.0, static_cast<double>(h)), cx = rng.uniform(0.0, static_cast<double>(w));
      const double ry = rng.uniform(0.1, 0.3) * size, rx = rng.uniform(0.1, 0.3) * size;
      const double phi = rng.uniform(0.0, std::numbers::pi);
      const double sharp = rng.uniform(3.0, 8.0);
      double color[3];
      for (auto& v : color) v = rng.uniform(-1.0, 1.0);
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
          const double u = (dx * std::cos(phi) + dy * std::sin(phi)) / rx;
          const double v = (-dx * std::sin(phi) + dy * std::cos(phi)) / ry;
          const double wgt = 1.0 / (1.0 + std::exp(-sharp * (1.0 - std::sqrt(u * u + v * v))));
          for (int c = 0; c < 3; ++c) {
            double& p = img[(static_cast<std::size_t>(c) * h + y) * w + x];
            p = (1.0 - wgt) * p + wgt * color[c];
          }
        }
      }
    }
    for (auto& p : img) p = std::clamp(p, -1.0, 1.0);
    out.emplace_back(Shape{3, h, w}, std::move(img));
  }
  return out;
}

std::vector<InpaintSample> make_inpaint_set(const std::vector<Tensor>& images, const MaskSpec& spec,
                                            std::uint64_t seed) {
  std::vector<InpaintSample> out;
  out.reserve(images.size());
  Rng noise(seed ^ 0x2545f4914f6cdd1dull);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    MaskSpec s = spec;
    s.seed = seed * 1000003ull + i;
    Mask m = make_mask(s, img.dim(1), img.dim(2));
    out.push_back({img, m.known, corrupt(img, m.known, noise)});
  }
  return out;
}

ImageState ImageState::start(const InpaintSample& s, double beta) {
  const std::size_t h = s.gt.dim(1), w = s.gt.dim(2);
  ImageState st;
  st.image = s.init;
  st.mask = reshape(s.mask, {1, h, w});
  st.mask3 = broadcast_to(st.mask, s.gt.shape());
  // Only the known pixels of the observation are ever used.
  st.observed = mul(st.mask3, s.gt);
  st.beta = st.base_beta = beta;
  return st;
}

InpaintController InpaintController::build(const InpaintConfig& cfg, Rng& rng) {
  if (cfg.conv_layers < 1) throw std::invalid_argument("controller needs at least one conv layer");
  std::vector<std::size_t> ch{7};
  for (std::size_t l = 1; l < cfg.conv_layers; ++l) ch.push_back(cfg.hidden);
  ch.push_back(4);
  InpaintController c;
  c.net = ConvStack::build(c.params, "ctl", ch, 3, Boundary::replicate, cfg.activation, rng);
  return c;
}

InpaintController::Output InpaintController::forward(const ImageState& s, double clip) const {
  Tensor input = concat({s.image, s.mask, s.observed});
  Tensor out = net.forward(params, input);
  Tensor delta = scale(tanh(slice(out, 0, 3)), clip);
  Tensor gate = broadcast_to(sigmoid(slice(out, 3, 4)), s.image.shape());
  return {delta, gate};
}

UpdateResult guarded_update(const ImageState& s, const Tensor& delta, const Tensor& gate, const InpaintConfig& cfg) {
  const std::size_t h = s.image.dim(1), w = s.image.dim(2);
  UpdateResult r{s};
  r.energy_before =
      energy_value(s.image.values(), s.observed.values(), s.mask.values(), h, w, cfg.lambda_tv_energy);
  Tensor moved = clamp_through(add(s.image, scale(mul(gate, delta), s.beta)), -1.0, 1.0);
  Tensor proposal = mask_blend(moved, s.mask3, s.observed);
  const double e = energy_value(proposal.values(), s.observed.values(), s.mask.values(), h, w, cfg.lambda_tv_energy);
  if (e <= r.energy_before) {
    r.accepted = true;
    r.state.image = proposal;
    r.energy_after = e;
  } else {
    r.state.beta = s.beta * cfg.backtrack;
    r.energy_after = r.energy_before;
  }
  return r;
}

ImageState inpaint_step(const InpaintController& ctl, const ImageState& s, const InpaintConfig& cfg, bool guard,
                        StepRecord* record) {
  ImageState cur = s;
  cur.beta = cur.base_beta;
  auto out = ctl.forward(cur, cfg.clip_at(cur.step));
  StepRecord rec;
  if (!guard) {
    Tensor moved = clamp_through(add(cur.image, scale(mul(out.gate, out.delta), cur.beta)), -1.0, 1.0);
    cur.image = mask_blend(moved, cur.mask3, cur.observed);
    rec.attempts = 1;
    rec.accepted = true;
  } else {
    for (std::size_t a = 0; a <= cfg.max_backtracks; ++a) {
      auto r = guarded_update(cur, out.delta, out.gate, cfg);
      cur = r.state;
      ++rec.attempts;
      if (r.accepted) {
        rec.accepted = true;
        break;
      }
    }
  }
  ++cur.step;
  if (record) {
    rec.energy = energy_value(cur.image.values(), cur.observed.values(), cur.mask.values(), cur.image.dim(1),
                              cur.image.dim(2), cfg.lambda_tv_energy);
    *record = rec;
  }
  return cur;
}

Tensor sample_loss(const InpaintController& ctl, const InpaintSample& sample, std::size_t depth, double beta,
                   const InpaintConfig& cfg, bool guard) {
  if (depth == 0) throw std::invalid_argument("sample_loss needs depth >= 1");
  ImageState s = ImageState::start(sample, beta);
  Tensor prev = s.image;
  Tensor total;
  for (std::size_t d = 0; d < depth; ++d) {
    prev = s.image;
    s = inpaint_step(ctl, s, cfg, guard);
    if (cfg.loss_all_steps) {
      Tensor l = step_loss(s.image, prev, sample.gt, cfg);
      total = total.defined() ? add(total, l) : l;
    }
  }
  if (cfg.loss_all_steps) return scale(total, 1.0 / static_cast<double>(depth));
  return step_loss(s.image, prev, sample.gt, cfg);
}

InpaintTrainReport train_inpaint(InpaintController& ctl, const std::vector<InpaintSample>& data,
                                 const InpaintConfig& cfg, const EpochCallback& on_epoch) {
  if (data.empty()) throw std::invalid_argument("train_inpaint: empty training set");
  if (cfg.epochs == 0 || cfg.batch == 0) throw std::invalid_argument("train_inpaint: epochs and batch must be > 0");
  Rng rng(cfg.seed ^ 0x94d049bb133111ebull);
  Adam adam;
  adam.lr = cfg.lr;
  InpaintTrainReport rep;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const std::size_t k = cfg.k_at(e);
    const double beta = cfg.beta_at(e);
    const std::size_t n = std::min(cfg.images_per_epoch, data.size());
    for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + rng.below(data.size() - i)]);
    std::vector<double> losses;
    losses.reserve(n);
    for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch) {
      const std::size_t b1 = std::min(n, b0 + cfg.batch);
      const double inv = 1.0 / static_cast<double>(b1 - b0);
      for (std::size_t i = b0; i < b1; ++i) {
        const std::size_t depth = 1 + rng.below(k);
        try {
          Tensor loss = sample_loss(ctl, data[order[i]], depth, beta, cfg, true);
          losses.push_back(loss.item());
          scale(loss, inv).backward();
        } catch (const std::domain_error& err) {
          throw std::runtime_error("inpaint training diverged at epoch " + std::to_string(e) + ", sample " +
                                   std::to_string(i) + ": " + err.what());
        }
      }
      adam.step(ctl.params);
    }
    const double mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
    rep.epoch_mean_loss.push_back(mean_loss);
    rep.epoch_median_loss.push_back(median(losses));
    rep.epoch_k.push_back(k);
    if (on_epoch) on_epoch(e, mean_loss, k);
  }
  return rep;
}

double image_psnr(const Tensor& a, const Tensor& b) { return psnr(a, b, 2.0); }

EvalResult eval_rollout(const InpaintController& ctl, const std::vector<InpaintSample>& test, std::size_t k,
                        bool guard, double beta, const InpaintConfig& cfg) {
  EvalResult res;
  res.psnr.assign(test.size(), {});
  res.energies.assign(test.size(), {});
  parallel_samples(test.size(), [&](std::size_t i) {
    const auto& sample = test[i];
    ImageState s = ImageState::start(sample, beta);
    s.image = s.image.detach();
    auto& ps = res.psnr[i];
    auto& en = res.energies[i];
    ps.push_back(image_psnr(s.image, sample.gt));
    en.push_back(energy_value(s.image.values(), s.observed.values(), s.mask.values(), s.image.dim(1), s.image.dim(2),
                              cfg.lambda_tv_energy));
    for (std::size_t t = 0; t < k; ++t) {
      StepRecord rec;
      s = inpaint_step(ctl, s, cfg, guard, &rec);
      s.image = s.image.detach();
      ps.push_back(image_psnr(s.image, sample.gt));
      en.push_back(rec.energy);
    }
  });
  res.mean_psnr.assign(k + 1, 0.0);
  for (const auto& ps : res.psnr) {
    for (std::size_t t = 0; t <= k; ++t) res.mean_psnr[t] += ps[t] / static_cast<double>(test.size());
  }
  return res;
}

}  // namespace nftm
