#pragma once

// Raw numeric kernels over contiguous row-major buffers. Every kernel comes in
// a `_serial` reference form and an `_omp` form. Forward kernels agree
// bitwise; adjoint kernels may sum taps in a different order and agree to
// rounding. Every _omp kernel only splits independent output elements, so
// its result does not depend on the thread count.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nftm {

enum class Boundary { periodic, replicate, zero };

Boundary parse_boundary(std::string_view name);
std::string_view to_string(Boundary b);

// Maps coordinate i on an axis of length n to an in-range index, or -1 when
// the zero boundary makes the site read as 0.
inline std::ptrdiff_t resolve_index(std::ptrdiff_t i, std::ptrdiff_t n, Boundary b) {
  if (i >= 0 && i < n) return i;
  switch (b) {
    case Boundary::periodic: {
      std::ptrdiff_t m = i % n;
      return m < 0 ? m + n : m;
    }
    case Boundary::replicate:
      return i < 0 ? 0 : n - 1;
    case Boundary::zero:
      return -1;
  }
  return -1;
}

// Number of OpenMP threads used by the _omp kernels. Initialised from
// NFTM_THREADS (0 or unset = runtime default).
int thread_count();
void set_thread_count(int n);

namespace kernels {

// ---- 5-point Laplacian, replicate boundary, over `planes` stacked H×W slabs.

void laplacian5_serial(std::span<const double> u, std::size_t planes, std::size_t h, std::size_t w,
                       std::span<double> out);
void laplacian5_omp(std::span<const double> u, std::size_t planes, std::size_t h, std::size_t w,
                    std::span<double> out);

// grad_u += L^T g. The replicate boundary makes L non-symmetric at the edges.
void laplacian5_adjoint_serial(std::span<const double> g, std::size_t planes, std::size_t h,
                               std::size_t w, std::span<double> grad_u);
void laplacian5_adjoint_omp(std::span<const double> g, std::size_t planes, std::size_t h,
                            std::size_t w, std::span<double> grad_u);

// ---- Explicit Euler heat step u' = u + alpha * L(u). alpha has 1 or h*w entries.

void heat_step_serial(std::span<const double> u, std::span<const double> alpha, std::size_t planes,
                      std::size_t h, std::size_t w, std::span<double> out);
void heat_step_omp(std::span<const double> u, std::span<const double> alpha, std::size_t planes,
                   std::size_t h, std::size_t w, std::span<double> out);

// ---- Same-size 2D cross-correlation.

struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t kernel = 3;
  Boundary boundary = Boundary::replicate;

  std::size_t patch() const { return in_channels * kernel * kernel; }
  std::size_t pixels() const { return height * width; }
};

void conv2d_direct(std::span<const double> x, std::span<const double> k, std::span<const double> bias,
                   const ConvGeometry& geo, std::span<double> out);
// Accumulates into gx, gk, gb; any of them may be empty to skip.
void conv2d_backward_direct(std::span<const double> x, std::span<const double> k,
                            std::span<const double> gout, const ConvGeometry& geo,
                            std::span<double> gx, std::span<double> gk, std::span<double> gb);

void im2col_omp(std::span<const double> x, const ConvGeometry& geo, std::span<double> cols);
void col2im_omp(std::span<const double> cols, const ConvGeometry& geo, std::span<double> gx);

void conv2d_gemm(std::span<const double> x, std::span<const double> k, std::span<const double> bias,
                 const ConvGeometry& geo, std::span<double> out);
void conv2d_backward_gemm(std::span<const double> x, std::span<const double> k,
                          std::span<const double> gout, const ConvGeometry& geo,
                          std::span<double> gx, std::span<double> gk, std::span<double> gb);

// ---- Dense neighbourhood gather over a channels×h×w field.
// out[(c*h*w + cell) * P + j] = f[c, cell + offsets[j]] under the boundary rule.

using Offset2 = std::array<std::ptrdiff_t, 2>;  // (dy, dx)

std::vector<Offset2> box_offsets(std::size_t radius, bool two_d);
std::vector<Offset2> ball_offsets(double radius, bool two_d);

void gather_serial(std::span<const double> f, std::size_t channels, std::size_t h, std::size_t w,
                   std::span<const Offset2> offsets, Boundary b, std::span<double> out);
void gather_omp(std::span<const double> f, std::size_t channels, std::size_t h, std::size_t w,
                std::span<const Offset2> offsets, Boundary b, std::span<double> out);
// grad_f += gather^T g
void gather_adjoint_serial(std::span<const double> g, std::size_t channels, std::size_t h,
                           std::size_t w, std::span<const Offset2> offsets, Boundary b,
                           std::span<double> grad_f);
void gather_adjoint_omp(std::span<const double> g, std::size_t channels, std::size_t h,
                        std::size_t w, std::span<const Offset2> offsets, Boundary b,
                        std::span<double> grad_f);

// ---- Fused local-attention machine step: out[x] = sum_j A[x, j] f[x + offsets[j]].

void local_attention_serial(std::span<const double> f, std::span<const double> kernel_weights,
                            std::size_t h, std::size_t w, std::span<const Offset2> offsets, Boundary b,
                            std::span<double> out);
void local_attention_omp(std::span<const double> f, std::span<const double> kernel_weights,
                         std::size_t h, std::size_t w, std::span<const Offset2> offsets, Boundary b,
                         std::span<double> out);

}  // namespace kernels
}  // namespace nftm
