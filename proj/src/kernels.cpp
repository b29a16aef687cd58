#include "nftm/kernels.hpp"

#include <Eigen/Core>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace nftm {

Boundary parse_boundary(std::string_view name) {
  if (name == "periodic") return Boundary::periodic;
  if (name == "replicate") return Boundary::replicate;
  if (name == "zero") return Boundary::zero;
  throw std::invalid_argument("unknown boundary rule '" + std::string(name) + "'");
}

std::string_view to_string(Boundary b) {
  switch (b) {
    case Boundary::periodic: return "periodic";
    case Boundary::replicate: return "replicate";
    case Boundary::zero: return "zero";
  }
  return "?";
}

namespace {

int initial_threads() {
  if (const char* env = std::getenv("NFTM_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
}

int g_threads = initial_threads();

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

inline std::ptrdiff_t sz(std::size_t v) { return static_cast<std::ptrdiff_t>(v); }

}  // namespace

int thread_count() { return g_threads; }

void set_thread_count(int n) { g_threads = n > 0 ? n : omp_get_max_threads(); }

namespace kernels {

// ---------------------------------------------------------------- Laplacian

void laplacian5_serial(std::span<const double> u, std::size_t planes, std::size_t h, std::size_t w,
                       std::span<double> out) {
  const auto H = sz(h), W = sz(w);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = u.data() + p * h * w;
    double* dst = out.data() + p * h * w;
    for (std::ptrdiff_t i = 0; i < H; ++i) {
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        auto at = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
          return src[resolve_index(y, H, Boundary::replicate) * W + resolve_index(x, W, Boundary::replicate)];
        };
        dst[i * W + j] = at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1) - 4.0 * at(i, j);
      }
    }
  }
}

void laplacian5_omp(std::span<const double> u, std::size_t planes, std::size_t h, std::size_t w,
                    std::span<double> out) {
  const auto rows = sz(planes * h);
  const auto W = sz(w);
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t plane = static_cast<std::size_t>(r) / h;
    const std::size_t i = static_cast<std::size_t>(r) % h;
    const double* base = u.data() + plane * h * w;
    const double* row = base + i * w;
    const double* up = base + (i == 0 ? 0 : i - 1) * w;
    const double* dn = base + (i + 1 == h ? i : i + 1) * w;
    double* dst = out.data() + static_cast<std::size_t>(r) * w;
    if (W == 1) {
      dst[0] = up[0] + dn[0] + row[0] + row[0] - 4.0 * row[0];
      continue;
    }
    dst[0] = up[0] + dn[0] + row[0] + row[1] - 4.0 * row[0];
    for (std::ptrdiff_t j = 1; j + 1 < W; ++j) {
      dst[j] = up[j] + dn[j] + row[j - 1] + row[j + 1] - 4.0 * row[j];
    }
    dst[W - 1] = up[W - 1] + dn[W - 1] + row[W - 2] + row[W - 1] - 4.0 * row[W - 1];
  }
}

void laplacian5_adjoint_serial(std::span<const double> g, std::size_t planes, std::size_t h,
                               std::size_t w, std::span<double> grad_u) {
  const auto H = sz(h), W = sz(w);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* gp = g.data() + p * h * w;
    double* du = grad_u.data() + p * h * w;
    for (std::ptrdiff_t i = 0; i < H; ++i) {
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        const double v = gp[i * W + j];
        auto add = [&](std::ptrdiff_t y, std::ptrdiff_t x, double s) {
          du[resolve_index(y, H, Boundary::replicate) * W + resolve_index(x, W, Boundary::replicate)] += s;
        };
        add(i - 1, j, v);
        add(i + 1, j, v);
        add(i, j - 1, v);
        add(i, j + 1, v);
        add(i, j, -4.0 * v);
      }
    }
  }
}

void laplacian5_adjoint_omp(std::span<const double> g, std::size_t planes, std::size_t h,
                            std::size_t w, std::span<double> grad_u) {
  // Pull form: each output site sums the stencil taps that resolve onto it.
  const auto rows = sz(planes * h);
  const auto H = sz(h), W = sz(w);
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t plane = static_cast<std::size_t>(r) / h;
    const auto i = sz(static_cast<std::size_t>(r) % h);
    const double* gp = g.data() + plane * h * w;
    double* du = grad_u.data() + static_cast<std::size_t>(r) * w;
    for (std::ptrdiff_t j = 0; j < W; ++j) {
      const double c = gp[i * W + j];
      double acc = -4.0 * c;
      acc += (i + 1 < H ? gp[(i + 1) * W + j] : 0.0) + (i == 0 ? c : 0.0);
      acc += (i >= 1 ? gp[(i - 1) * W + j] : 0.0) + (i == H - 1 ? c : 0.0);
      acc += (j + 1 < W ? gp[i * W + j + 1] : 0.0) + (j == 0 ? c : 0.0);
      acc += (j >= 1 ? gp[i * W + j - 1] : 0.0) + (j == W - 1 ? c : 0.0);
      du[j] += acc;
    }
  }
}

// ---------------------------------------------------------------- heat step

void heat_step_serial(std::span<const double> u, std::span<const double> alpha, std::size_t planes,
                      std::size_t h, std::size_t w, std::span<double> out) {
  laplacian5_serial(u, planes, h, w, out);
  const std::size_t n = h * w;
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t c = 0; c < n; ++c) {
      const double a = alpha.size() == 1 ? alpha[0] : alpha[c];
      out[p * n + c] = u[p * n + c] + a * out[p * n + c];
    }
  }
}

void heat_step_omp(std::span<const double> u, std::span<const double> alpha, std::size_t planes,
                   std::size_t h, std::size_t w, std::span<double> out) {
  laplacian5_omp(u, planes, h, w, out);
  const std::size_t n = h * w;
  const auto total = sz(planes * n);
  const bool scalar = alpha.size() == 1;
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t k = 0; k < total; ++k) {
    const auto c = static_cast<std::size_t>(k) % n;
    out[k] = u[k] + (scalar ? alpha[0] : alpha[c]) * out[k];
  }
}

// ---------------------------------------------------------------- conv2d

namespace {

void check_conv(const ConvGeometry& geo) {
  if (geo.kernel % 2 == 0) throw std::invalid_argument("conv2d kernel size must be odd");
}

}  // namespace

void conv2d_direct(std::span<const double> x, std::span<const double> k, std::span<const double> bias,
                   const ConvGeometry& geo, std::span<double> out) {
  check_conv(geo);
  const auto H = sz(geo.height), W = sz(geo.width), K = sz(geo.kernel), R = K / 2;
  for (std::size_t co = 0; co < geo.out_channels; ++co) {
    for (std::ptrdiff_t i = 0; i < H; ++i) {
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        double acc = bias[co];
        for (std::size_t ci = 0; ci < geo.in_channels; ++ci) {
          for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
            for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
              const auto y = resolve_index(i + ky - R, H, geo.boundary);
              const auto xx = resolve_index(j + kx - R, W, geo.boundary);
              if (y < 0 || xx < 0) continue;
              acc += k[((co * geo.in_channels + ci) * geo.kernel + ky) * geo.kernel + kx] *
                     x[(ci * geo.height + y) * geo.width + xx];
            }
          }
        }
        out[(co * geo.height + i) * geo.width + j] = acc;
      }
    }
  }
}

void conv2d_backward_direct(std::span<const double> x, std::span<const double> k,
                            std::span<const double> gout, const ConvGeometry& geo,
                            std::span<double> gx, std::span<double> gk, std::span<double> gb) {
  check_conv(geo);
  const auto H = sz(geo.height), W = sz(geo.width), K = sz(geo.kernel), R = K / 2;
  for (std::size_t co = 0; co < geo.out_channels; ++co) {
    for (std::ptrdiff_t i = 0; i < H; ++i) {
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        const double g = gout[(co * geo.height + i) * geo.width + j];
        if (!gb.empty()) gb[co] += g;
        for (std::size_t ci = 0; ci < geo.in_channels; ++ci) {
          for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
            for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
              const auto y = resolve_index(i + ky - R, H, geo.boundary);
              const auto xx = resolve_index(j + kx - R, W, geo.boundary);
              if (y < 0 || xx < 0) continue;
              const auto kidx = ((co * geo.in_channels + ci) * geo.kernel + ky) * geo.kernel + kx;
              const auto xidx = (ci * geo.height + y) * geo.width + xx;
              if (!gk.empty()) gk[kidx] += g * x[xidx];
              if (!gx.empty()) gx[xidx] += g * k[kidx];
            }
          }
        }
      }
    }
  }
}

void im2col_omp(std::span<const double> x, const ConvGeometry& geo, std::span<double> cols) {
  const auto H = sz(geo.height), W = sz(geo.width), K = sz(geo.kernel), R = K / 2;
  const auto rows = sz(geo.patch());
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t row = 0; row < rows; ++row) {
    const auto ci = row / (K * K);
    const auto ky = (row / K) % K;
    const auto kx = row % K;
    const double* plane = x.data() + ci * H * W;
    double* dst = cols.data() + row * H * W;
    for (std::ptrdiff_t i = 0; i < H; ++i) {
      const auto y = resolve_index(i + ky - R, H, geo.boundary);
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        const auto xx = resolve_index(j + kx - R, W, geo.boundary);
        dst[i * W + j] = (y < 0 || xx < 0) ? 0.0 : plane[y * W + xx];
      }
    }
  }
}

void col2im_omp(std::span<const double> cols, const ConvGeometry& geo, std::span<double> gx) {
  const auto H = sz(geo.height), W = sz(geo.width), K = sz(geo.kernel), R = K / 2;
  const auto C = sz(geo.in_channels);
  // One channel per task: rows of `cols` belonging to a channel only touch
  // that channel's plane, so the accumulation order is fixed.
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t ci = 0; ci < C; ++ci) {
    double* plane = gx.data() + ci * H * W;
    for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
      for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
        const double* src = cols.data() + ((ci * K + ky) * K + kx) * H * W;
        for (std::ptrdiff_t i = 0; i < H; ++i) {
          const auto y = resolve_index(i + ky - R, H, geo.boundary);
          if (y < 0) continue;
          for (std::ptrdiff_t j = 0; j < W; ++j) {
            const auto xx = resolve_index(j + kx - R, W, geo.boundary);
            if (xx < 0) continue;
            plane[y * W + xx] += src[i * W + j];
          }
        }
      }
    }
  }
}

void conv2d_gemm(std::span<const double> x, std::span<const double> k, std::span<const double> bias,
                 const ConvGeometry& geo, std::span<double> out) {
  check_conv(geo);
  const auto P = sz(geo.patch()), N = sz(geo.pixels()), Co = sz(geo.out_channels);
  std::vector<double> cols(geo.patch() * geo.pixels());
  im2col_omp(x, geo, cols);
  ConstRowMap kmat(k.data(), Co, P);
  ConstRowMap cmat(cols.data(), P, N);
  RowMap omat(out.data(), Co, N);
  omat.noalias() = kmat * cmat;
  for (std::ptrdiff_t co = 0; co < Co; ++co) omat.row(co).array() += bias[co];
}

void conv2d_backward_gemm(std::span<const double> x, std::span<const double> k,
                          std::span<const double> gout, const ConvGeometry& geo,
                          std::span<double> gx, std::span<double> gk, std::span<double> gb) {
  check_conv(geo);
  const auto P = sz(geo.patch()), N = sz(geo.pixels()), Co = sz(geo.out_channels);
  ConstRowMap gmat(gout.data(), Co, N);
  if (!gb.empty()) {
    for (std::ptrdiff_t co = 0; co < Co; ++co) gb[co] += gmat.row(co).sum();
  }
  if (!gk.empty()) {
    std::vector<double> cols(geo.patch() * geo.pixels());
    im2col_omp(x, geo, cols);
    ConstRowMap cmat(cols.data(), P, N);
    RowMap gkmat(gk.data(), Co, P);
    gkmat.noalias() += gmat * cmat.transpose();
  }
  if (!gx.empty()) {
    std::vector<double> gcols(geo.patch() * geo.pixels());
    ConstRowMap kmat(k.data(), Co, P);
    RowMap gcmat(gcols.data(), P, N);
    gcmat.noalias() = kmat.transpose() * gmat;
    col2im_omp(gcols, geo, gx);
  }
}

// ---------------------------------------------------------------- gather

std::vector<Offset2> box_offsets(std::size_t radius, bool two_d) {
  std::vector<Offset2> out;
  const auto r = sz(radius);
  for (std::ptrdiff_t dy = two_d ? -r : 0; dy <= (two_d ? r : 0); ++dy) {
    for (std::ptrdiff_t dx = -r; dx <= r; ++dx) out.push_back({dy, dx});
  }
  return out;
}

std::vector<Offset2> ball_offsets(double radius, bool two_d) {
  if (radius < 0) throw std::invalid_argument("support radius must be non-negative");
  std::vector<Offset2> out;
  const auto r = static_cast<std::ptrdiff_t>(std::floor(radius));
  for (std::ptrdiff_t dy = two_d ? -r : 0; dy <= (two_d ? r : 0); ++dy) {
    for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
      if (static_cast<double>(dy * dy + dx * dx) <= radius * radius + 1e-12) out.push_back({dy, dx});
    }
  }
  return out;
}

void gather_serial(std::span<const double> f, std::size_t channels, std::size_t h, std::size_t w,
                   std::span<const Offset2> offsets, Boundary b, std::span<double> out) {
  const auto H = sz(h), W = sz(w);
  const std::size_t P = offsets.size();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::ptrdiff_t i = 0; i < H; ++i) {
      for (std::ptrdiff_t j = 0; j < W; ++j) {
        const std::size_t cell = c * h * w + static_cast<std::size_t>(i * W + j);
        for (std::size_t p = 0; p < P; ++p) {
          const auto y = resolve_index(i + offsets[p][0], H, b);
          const auto x = resolve_index(j + offsets[p][1], W, b);
          out[cell * P + p] = (y < 0 || x < 0) ? 0.0 : f[c * h * w + static_cast<std::size_t>(y * W + x)];
        }
      }
    }
  }
}

void gather_omp(std::span<const double> f, std::size_t channels, std::size_t h, std::size_t w,
                std::span<const Offset2> offsets, Boundary b, std::span<double> out) {
  const auto H = sz(h), W = sz(w);
  const std::size_t P = offsets.size();
  const auto rows = sz(channels * h);
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto c = static_cast<std::size_t>(r) / h;
    const auto i = sz(static_cast<std::size_t>(r) % h);
    const double* plane = f.data() + c * h * w;
    for (std::ptrdiff_t j = 0; j < W; ++j) {
      double* dst = out.data() + (static_cast<std::size_t>(r) * w + static_cast<std::size_t>(j)) * P;
      for (std::size_t p = 0; p < P; ++p) {
        const auto y = resolve_index(i + offsets[p][0], H, b);
        const auto x = resolve_index(j + offsets[p][1], W, b);
        dst[p] = (y < 0 || x < 0) ? 0.0 : plane[y * W + x];
      }
    }
  }
}

namespace {

void gather_adjoint_plane(const double* g, std::size_t h, std::size_t w, std::span<const Offset2> offsets,
                          Boundary b, double* grad) {
  const auto H = sz(h), W = sz(w);
  const std::size_t P = offsets.size();
  for (std::ptrdiff_t i = 0; i < H; ++i) {
    for (std::ptrdiff_t j = 0; j < W; ++j) {
      const double* gc = g + static_cast<std::size_t>(i * W + j) * P;
      for (std::size_t p = 0; p < P; ++p) {
        const auto y = resolve_index(i + offsets[p][0], H, b);
        const auto x = resolve_index(j + offsets[p][1], W, b);
        if (y >= 0 && x >= 0) grad[y * W + x] += gc[p];
      }
    }
  }
}

}  // namespace

void gather_adjoint_serial(std::span<const double> g, std::size_t channels, std::size_t h,
                           std::size_t w, std::span<const Offset2> offsets, Boundary b,
                           std::span<double> grad_f) {
  for (std::size_t c = 0; c < channels; ++c) {
    gather_adjoint_plane(g.data() + c * h * w * offsets.size(), h, w, offsets, b, grad_f.data() + c * h * w);
  }
}

void gather_adjoint_omp(std::span<const double> g, std::size_t channels, std::size_t h,
                        std::size_t w, std::span<const Offset2> offsets, Boundary b,
                        std::span<double> grad_f) {
  const auto C = sz(channels);
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t c = 0; c < C; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    gather_adjoint_plane(g.data() + uc * h * w * offsets.size(), h, w, offsets, b, grad_f.data() + uc * h * w);
  }
}

// ---------------------------------------------------------------- local attention

void local_attention_serial(std::span<const double> f, std::span<const double> kernel_weights,
                            std::size_t h, std::size_t w, std::span<const Offset2> offsets, Boundary b,
                            std::span<double> out) {
  const auto H = sz(h), W = sz(w);
  const std::size_t P = offsets.size();
  for (std::ptrdiff_t i = 0; i < H; ++i) {
    for (std::ptrdiff_t j = 0; j < W; ++j) {
      const auto cell = static_cast<std::size_t>(i * W + j);
      double acc = 0.0;
      for (std::size_t p = 0; p < P; ++p) {
        const auto y = resolve_index(i + offsets[p][0], H, b);
        const auto x = resolve_index(j + offsets[p][1], W, b);
        if (y >= 0 && x >= 0) acc += kernel_weights[cell * P + p] * f[y * W + x];
      }
      out[cell] = acc;
    }
  }
}

void local_attention_omp(std::span<const double> f, std::span<const double> kernel_weights,
                         std::size_t h, std::size_t w, std::span<const Offset2> offsets, Boundary b,
                         std::span<double> out) {
  const auto H = sz(h), W = sz(w);
  const std::size_t P = offsets.size();
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (std::ptrdiff_t i = 0; i < H; ++i) {
    for (std::ptrdiff_t j = 0; j < W; ++j) {
      const auto cell = static_cast<std::size_t>(i * W + j);
      const double* a = kernel_weights.data() + cell * P;
      double acc = 0.0;
      for (std::size_t p = 0; p < P; ++p) {
        const auto y = resolve_index(i + offsets[p][0], H, b);
        const auto x = resolve_index(j + offsets[p][1], W, b);
        if (y >= 0 && x >= 0) acc += a[p] * f[y * W + x];
      }
      out[cell] = acc;
    }
  }
}

}  // namespace kernels
}  // namespace nftm
