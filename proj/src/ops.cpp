#include "nftm/ops.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace nftm {

namespace {

using detail::Node;

inline std::ptrdiff_t ssz(std::size_t v) { return static_cast<std::ptrdiff_t>(v); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

Pointwise parse_pointwise(std::string_view name) {
  if (name == "sigmoid") return Pointwise::sigmoid;
  if (name == "tanh") return Pointwise::tanh;
  if (name == "relu") return Pointwise::relu;
  if (name == "softplus") return Pointwise::softplus;
  if (name == "exp") return Pointwise::exp;
  if (name == "log") return Pointwise::log;
  if (name == "square") return Pointwise::square;
  if (name == "abs") return Pointwise::abs;
  if (name == "identity") return Pointwise::identity;
  throw std::invalid_argument("unknown nonlinearity '" + std::string(name) + "'");
}

std::string_view to_string(Pointwise kind) {
  switch (kind) {
    case Pointwise::sigmoid: return "sigmoid";
    case Pointwise::tanh: return "tanh";
    case Pointwise::relu: return "relu";
    case Pointwise::softplus: return "softplus";
    case Pointwise::exp: return "exp";
    case Pointwise::log: return "log";
    case Pointwise::square: return "square";
    case Pointwise::abs: return "abs";
    case Pointwise::identity: return "identity";
  }
  return "?";
}

double apply_pointwise(Pointwise kind, double x) {
  switch (kind) {
    case Pointwise::sigmoid: return sigmoid_scalar(x);
    case Pointwise::tanh: return std::tanh(x);
    case Pointwise::relu: return x > 0 ? x : 0.0;
    case Pointwise::softplus: return softplus_scalar(x);
    case Pointwise::exp: return std::exp(x);
    case Pointwise::log: return std::log(x);
    case Pointwise::square: return x * x;
    case Pointwise::abs: return std::fabs(x);
    case Pointwise::identity: return x;
  }
  return x;
}

Tensor pointwise(Pointwise kind, const Tensor& x) {
  auto in = x.values();
  const auto n = in.size();
  if (kind == Pointwise::log) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!(in[i] > 0.0)) {
        throw std::domain_error("log of non-positive value " + std::to_string(in[i]) + " at index " +
                                std::to_string(i));
      }
    }
  }
  std::vector<double> out(n);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (n > 32768)
  for (std::ptrdiff_t i = 0; i < ssz(n); ++i) out[i] = apply_pointwise(kind, in[i]);

  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [kind](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        const auto& xv = p.values;
        const auto& yv = self.values;
        const auto& gy = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
          double d = 1.0;
          switch (kind) {
            case Pointwise::sigmoid: d = yv[i] * (1.0 - yv[i]); break;
            case Pointwise::tanh: d = 1.0 - yv[i] * yv[i]; break;
            case Pointwise::relu: d = xv[i] > 0 ? 1.0 : 0.0; break;
            case Pointwise::softplus: d = sigmoid_scalar(xv[i]); break;
            case Pointwise::exp: d = yv[i]; break;
            case Pointwise::log: d = 1.0 / xv[i]; break;
            case Pointwise::square: d = 2.0 * xv[i]; break;
            case Pointwise::abs: d = xv[i] > 0 ? 1.0 : (xv[i] < 0 ? -1.0 : 0.0); break;
            case Pointwise::identity: d = 1.0; break;
          }
          g[i] += gy[i] * d;
        }
      },
      "pointwise");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
          Node& p = parent(self, k);
          if (!wants_grad(p)) continue;
          auto g = grad_of(p);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
      },
      "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [](Node& self) {
        if (Node& p = parent(self, 0); wants_grad(p)) {
          auto g = grad_of(p);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (Node& p = parent(self, 1); wants_grad(p)) {
          auto g = grad_of(p);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
      },
      "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (wants_grad(pa)) {
          auto g = grad_of(pa);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.values[i];
        }
        if (wants_grad(pb)) {
          auto g = grad_of(pb);
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.values[i];
        }
      },
      "mul");
}

Tensor scale(const Tensor& x, double c) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * xv[i];
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [c](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
      },
      "scale");
}

Tensor add_scalar(const Tensor& x, double c) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + c;
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      },
      "add_scalar");
}

Tensor broadcast_to(const Tensor& x, const Shape& target) {
  const auto n = x.numel();
  const auto total = numel_of(target);
  bool ok = n == 1;
  if (!ok) {
    Shape s = x.shape();
    std::size_t lead = 0;
    while (lead + 1 < s.size() && s[lead] == 1) ++lead;
    s.erase(s.begin(), s.begin() + ssz(lead));
    ok = s.size() <= target.size() && std::equal(s.rbegin(), s.rend(), target.rbegin());
  }
  if (!ok) {
    throw std::invalid_argument("broadcast_to: cannot broadcast " + shape_str(x.shape()) + " to " +
                                shape_str(target));
  }
  auto xv = x.values();
  std::vector<double> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = xv[i % n];
  return Tensor::make_result(
      target, std::move(out), {x},
      [n](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
      },
      "broadcast_to");
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1 || x.dim(1) != weight.dim(0) ||
      bias.dim(0) != weight.dim(1)) {
    throw std::invalid_argument("affine: incompatible shapes x" + shape_str(x.shape()) + " W" +
                                shape_str(weight.shape()) + " b" + shape_str(bias.shape()));
  }
  const std::size_t B = x.dim(0), n = x.dim(1), m = weight.dim(1);
  auto xv = x.values(), wv = weight.values(), bv = bias.values();
  std::vector<double> out(B * m);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (B * n * m > 65536)
  for (std::ptrdiff_t r = 0; r < ssz(B); ++r) {
    double* o = out.data() + static_cast<std::size_t>(r) * m;
    for (std::size_t j = 0; j < m; ++j) o[j] = bv[j];
    const double* xr = xv.data() + static_cast<std::size_t>(r) * n;
    for (std::size_t k = 0; k < n; ++k) {
      const double a = xr[k];
      const double* wr = wv.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += a * wr[j];
    }
  }
  return Tensor::make_result(
      {B, m}, std::move(out), {x, weight, bias},
      [B, n, m](Node& self) {
        Node& px = parent(self, 0);
        Node& pw = parent(self, 1);
        Node& pb = parent(self, 2);
        const auto& gy = self.grad;
        if (wants_grad(px)) {
          auto g = grad_of(px);
          for (std::size_t r = 0; r < B; ++r) {
            for (std::size_t k = 0; k < n; ++k) {
              double acc = 0.0;
              for (std::size_t j = 0; j < m; ++j) acc += gy[r * m + j] * pw.values[k * m + j];
              g[r * n + k] += acc;
            }
          }
        }
        if (wants_grad(pw)) {
          auto g = grad_of(pw);
          for (std::size_t r = 0; r < B; ++r) {
            for (std::size_t k = 0; k < n; ++k) {
              const double a = px.values[r * n + k];
              for (std::size_t j = 0; j < m; ++j) g[k * m + j] += a * gy[r * m + j];
            }
          }
        }
        if (wants_grad(pb)) {
          auto g = grad_of(pb);
          for (std::size_t r = 0; r < B; ++r) {
            for (std::size_t j = 0; j < m; ++j) g[j] += gy[r * m + j];
          }
        }
      },
      "affine");
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, Boundary padding) {
  if (x.rank() != 3 || kernels.rank() != 4 || bias.rank() != 1) {
    throw std::invalid_argument("conv2d: expected x[C,H,W], kernels[Co,Ci,k,k], bias[Co]; got " +
                                shape_str(x.shape()) + ", " + shape_str(kernels.shape()) + ", " +
                                shape_str(bias.shape()));
  }
  if (kernels.dim(2) != kernels.dim(3) || kernels.dim(2) % 2 == 0) {
    throw std::invalid_argument("conv2d: kernel must be square with odd size, got " +
                                shape_str(kernels.shape()));
  }
  if (kernels.dim(1) != x.dim(0)) {
    throw std::invalid_argument("conv2d: channel mismatch, input " + shape_str(x.shape()) + " vs kernels " +
                                shape_str(kernels.shape()));
  }
  if (bias.dim(0) != kernels.dim(0)) {
    throw std::invalid_argument("conv2d: bias " + shape_str(bias.shape()) + " does not match kernels " +
                                shape_str(kernels.shape()));
  }
  kernels::ConvGeometry geo{x.dim(0), kernels.dim(0), x.dim(1), x.dim(2), kernels.dim(2), padding};
  std::vector<double> out(geo.out_channels * geo.pixels());
  kernels::conv2d_gemm(x.values(), kernels.values(), bias.values(), geo, out);
  return Tensor::make_result(
      {geo.out_channels, geo.height, geo.width}, std::move(out), {x, kernels, bias},
      [geo](Node& self) {
        Node& px = parent(self, 0);
        Node& pk = parent(self, 1);
        Node& pb = parent(self, 2);
        std::span<double> gx, gk, gb;
        if (wants_grad(px)) gx = grad_of(px);
        if (wants_grad(pk)) gk = grad_of(pk);
        if (wants_grad(pb)) gb = grad_of(pb);
        kernels::conv2d_backward_gemm(px.values, pk.values, self.grad, geo, gx, gk, gb);
      },
      "conv2d");
}

Tensor ste_binarize(const Tensor& x) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] >= 0.5 ? 1.0 : 0.0;
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      },
      "ste_binarize");
}

Tensor clamp_through(const Tensor& x, double lo, double hi) {
  if (!(lo < hi)) {
    throw std::invalid_argument("clamp_through: need lo < hi, got [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
  }
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, xv[i]));
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [lo, hi](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double v = p.values[i];
          if (v >= lo && v <= hi) g[i] += self.grad[i];
        }
      },
      "clamp_through");
}

Tensor reduce(Reduce kind, const Tensor& x) {
  if (x.numel() == 0) throw std::invalid_argument("reduce over an empty tensor");
  auto xv = x.values();
  double acc = 0.0;
  for (double v : xv) acc += v;
  const double factor = kind == Reduce::mean ? 1.0 / static_cast<double>(xv.size()) : 1.0;
  return Tensor::make_result(
      {1}, {acc * factor}, {x},
      [factor](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        const double s = self.grad[0] * factor;
        for (auto& v : g) v += s;
      },
      kind == Reduce::mean ? "mean" : "sum");
}

Tensor sum_last(const Tensor& x) {
  const auto& s = x.shape();
  const std::size_t n = s.back();
  const std::size_t rows = x.numel() / n;
  Shape out_shape(s.begin(), s.end() - 1);
  if (out_shape.empty()) out_shape = {1};
  auto xv = x.values();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += xv[r * n + j];
    out[r] = acc;
  }
  return Tensor::make_result(
      out_shape, std::move(out), {x},
      [n](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i / n];
      },
      "sum_last");
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    throw std::invalid_argument("reshape: " + shape_str(x.shape()) + " cannot become " + shape_str(shape));
  }
  auto xv = x.values();
  return Tensor::make_result(
      std::move(shape), std::vector<double>(xv.begin(), xv.end()), {x},
      [](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      },
      "reshape");
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t rows = 0;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    Shape t(p.shape().begin() + 1, p.shape().end());
    if (t != tail) {
      throw std::invalid_argument("concat: trailing shape mismatch " + shape_str(parts[0].shape()) + " vs " +
                                  shape_str(p.shape()));
    }
    rows += p.dim(0);
    sizes.push_back(p.numel());
  }
  std::vector<double> out;
  out.reserve(rows * numel_of(tail.empty() ? Shape{1} : tail));
  for (const auto& p : parts) {
    auto v = p.values();
    out.insert(out.end(), v.begin(), v.end());
  }
  Shape shape{rows};
  shape.insert(shape.end(), tail.begin(), tail.end());
  return Tensor::make_result(
      std::move(shape), std::move(out), parts,
      [sizes](Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
          Node& p = parent(self, k);
          if (wants_grad(p)) {
            auto g = grad_of(p);
            for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += self.grad[off + i];
          }
          off += sizes[k];
        }
      },
      "concat");
}

Tensor slice(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin >= end || end > x.dim(0)) {
    throw std::invalid_argument("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                                ") out of range for " + shape_str(x.shape()));
  }
  const std::size_t stride = x.numel() / x.dim(0);
  auto xv = x.values();
  Shape shape = x.shape();
  shape[0] = end - begin;
  std::vector<double> out(xv.begin() + ssz(begin * stride), xv.begin() + ssz(end * stride));
  const std::size_t off = begin * stride;
  return Tensor::make_result(
      std::move(shape), std::move(out), {x},
      [off](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[off + i] += self.grad[i];
      },
      "slice");
}

namespace {

struct PlaneDims {
  std::size_t planes, h, w;
};

PlaneDims plane_dims(const Tensor& x, const char* op) {
  if (x.rank() < 2) {
    throw std::invalid_argument(std::string(op) + ": need at least 2 axes, got " + shape_str(x.shape()));
  }
  const auto& s = x.shape();
  const std::size_t h = s[s.size() - 2], w = s.back();
  return {x.numel() / (h * w), h, w};
}

}  // namespace

Tensor laplacian5(const Tensor& u) {
  const auto d = plane_dims(u, "laplacian5");
  std::vector<double> out(u.numel());
  kernels::laplacian5_omp(u.values(), d.planes, d.h, d.w, out);
  return Tensor::make_result(
      u.shape(), std::move(out), {u},
      [d](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        kernels::laplacian5_adjoint_omp(self.grad, d.planes, d.h, d.w, grad_of(p));
      },
      "laplacian5");
}

Tensor tv_l1(const Tensor& x) {
  const auto d = plane_dims(x, "tv_l1");
  auto xv = x.values();
  double acc = 0.0;
  for (std::size_t p = 0; p < d.planes; ++p) {
    const double* v = xv.data() + p * d.h * d.w;
    for (std::size_t i = 0; i < d.h; ++i) {
      for (std::size_t j = 0; j < d.w; ++j) {
        if (j + 1 < d.w) acc += std::fabs(v[i * d.w + j + 1] - v[i * d.w + j]);
        if (i + 1 < d.h) acc += std::fabs(v[(i + 1) * d.w + j] - v[i * d.w + j]);
      }
    }
  }
  return Tensor::make_result(
      {1}, {acc}, {x},
      [d](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        const double s = self.grad[0];
        auto sgn = [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); };
        for (std::size_t pl = 0; pl < d.planes; ++pl) {
          const double* v = p.values.data() + pl * d.h * d.w;
          double* gp = g.data() + pl * d.h * d.w;
          for (std::size_t i = 0; i < d.h; ++i) {
            for (std::size_t j = 0; j < d.w; ++j) {
              const std::size_t c = i * d.w + j;
              if (j + 1 < d.w) {
                const double t = s * sgn(v[c + 1] - v[c]);
                gp[c + 1] += t;
                gp[c] -= t;
              }
              if (i + 1 < d.h) {
                const double t = s * sgn(v[c + d.w] - v[c]);
                gp[c + d.w] += t;
                gp[c] -= t;
              }
            }
          }
        }
      },
      "tv_l1");
}

Tensor mask_blend(const Tensor& x, const Tensor& mask, const Tensor& observed) {
  require_same_shape(x, mask, "mask_blend");
  require_same_shape(x, observed, "mask_blend");
  auto xv = x.values(), mv = mask.values(), ov = observed.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mv[i] * ov[i] + (1.0 - mv[i]) * xv[i];
  auto keep = std::make_shared<std::vector<double>>(mv.begin(), mv.end());
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [keep](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += (1.0 - (*keep)[i]) * self.grad[i];
      },
      "mask_blend");
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> targets, std::span<const double> weights) {
  if (targets.size() != logits.numel()) {
    throw std::invalid_argument("bce_with_logits: " + std::to_string(targets.size()) + " targets for logits " +
                                shape_str(logits.shape()));
  }
  if (!weights.empty() && weights.size() != targets.size()) {
    throw std::invalid_argument("bce_with_logits: " + std::to_string(weights.size()) + " weights for " +
                                std::to_string(targets.size()) + " targets");
  }
  auto z = logits.values();
  auto w = std::make_shared<std::vector<double>>(z.size(), 1.0);
  if (!weights.empty()) w->assign(weights.begin(), weights.end());
  double acc = 0.0, total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double wi = (*w)[i];
    if (!(wi >= 0.0)) throw std::invalid_argument("bce_with_logits: negative weight at index " + std::to_string(i));
    // log(1 + e^z) - y z, written to avoid overflow
    acc += wi * (std::max(z[i], 0.0) - z[i] * targets[i] + std::log1p(std::exp(-std::fabs(z[i]))));
    total += wi;
  }
  if (!(total > 0.0)) throw std::invalid_argument("bce_with_logits: weights sum to zero");
  auto y = std::make_shared<std::vector<double>>(targets.begin(), targets.end());
  return Tensor::make_result(
      {1}, {acc / total}, {logits},
      [y, w, total](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        const double s = self.grad[0] / total;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * (*w)[i] * (sigmoid_scalar(p.values[i]) - (*y)[i]);
      },
      "bce_with_logits");
}

Tensor linear_map(const Tensor& x, const SparseMap& map) {
  if (numel_of(map.out_shape) != map.rows()) {
    throw std::invalid_argument("linear_map: output shape " + shape_str(map.out_shape) + " has " +
                                std::to_string(numel_of(map.out_shape)) + " entries but map has " +
                                std::to_string(map.rows()) + " rows");
  }
  auto xv = x.values();
  for (auto idx : map.index) {
    if (idx >= xv.size()) throw std::out_of_range("linear_map: index " + std::to_string(idx) + " out of range");
  }
  auto m = std::make_shared<SparseMap>(map);
  std::vector<double> out(m->rows());
  for (std::size_t r = 0; r < m->rows(); ++r) {
    double acc = 0.0;
    for (std::size_t k = m->row_start[r]; k < m->row_start[r + 1]; ++k) acc += m->weight[k] * xv[m->index[k]];
    out[r] = acc;
  }
  return Tensor::make_result(
      m->out_shape, std::move(out), {x},
      [m](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        auto g = grad_of(p);
        for (std::size_t r = 0; r < m->rows(); ++r) {
          for (std::size_t k = m->row_start[r]; k < m->row_start[r + 1]; ++k) {
            g[m->index[k]] += m->weight[k] * self.grad[r];
          }
        }
      },
      "linear_map");
}

Tensor gather_neighborhoods(const Tensor& field, std::size_t channels, std::size_t h, std::size_t w,
                            const std::vector<kernels::Offset2>& offsets, Boundary b) {
  if (field.numel() != channels * h * w) {
    throw std::invalid_argument("gather_neighborhoods: field " + shape_str(field.shape()) +
                                " does not have " + std::to_string(channels) + "x" + std::to_string(h) + "x" +
                                std::to_string(w) + " entries");
  }
  const std::size_t P = offsets.size();
  std::vector<double> out(channels * h * w * P);
  kernels::gather_omp(field.values(), channels, h, w, offsets, b, out);
  auto offs = std::make_shared<std::vector<kernels::Offset2>>(offsets);
  return Tensor::make_result(
      {channels * h * w, P}, std::move(out), {field},
      [offs, channels, h, w, b](Node& self) {
        Node& p = parent(self, 0);
        if (!wants_grad(p)) return;
        kernels::gather_adjoint_omp(self.grad, channels, h, w, *offs, b, grad_of(p));
      },
      "gather_neighborhoods");
}

}  // namespace nftm
