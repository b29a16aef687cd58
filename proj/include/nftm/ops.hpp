#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "nftm/kernels.hpp"
#include "nftm/tensor.hpp"

namespace nftm {

enum class Pointwise { sigmoid, tanh, relu, softplus, exp, log, square, abs, identity };

Pointwise parse_pointwise(std::string_view name);
std::string_view to_string(Pointwise kind);

// Scalar evaluation of a pointwise kind; used by kernels that bypass the tape.
double apply_pointwise(Pointwise kind, double x);

Tensor pointwise(Pointwise kind, const Tensor& x);
inline Tensor sigmoid(const Tensor& x) { return pointwise(Pointwise::sigmoid, x); }
inline Tensor tanh(const Tensor& x) { return pointwise(Pointwise::tanh, x); }
inline Tensor relu(const Tensor& x) { return pointwise(Pointwise::relu, x); }
inline Tensor softplus(const Tensor& x) { return pointwise(Pointwise::softplus, x); }
inline Tensor exp(const Tensor& x) { return pointwise(Pointwise::exp, x); }
inline Tensor log(const Tensor& x) { return pointwise(Pointwise::log, x); }
inline Tensor square(const Tensor& x) { return pointwise(Pointwise::square, x); }
inline Tensor abs(const Tensor& x) { return pointwise(Pointwise::abs, x); }

// Elementwise arithmetic on equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);

// Repeats x over leading axes of `target`. Allowed when x has one element or
// x's shape (ignoring leading 1s) is a suffix of `target`.
Tensor broadcast_to(const Tensor& x, const Shape& target);

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, Boundary padding);

// Forward: 1 where x >= 0.5, else 0 (round-half-up of x + 0.5, kept binary).
// Backward: identity.
Tensor ste_binarize(const Tensor& x);

// Forward clamps to [lo, hi]; backward passes gradient only where lo <= x <= hi.
Tensor clamp_through(const Tensor& x, double lo, double hi);

enum class Reduce { sum, mean };
Tensor reduce(Reduce kind, const Tensor& x);
inline Tensor sum(const Tensor& x) { return reduce(Reduce::sum, x); }
inline Tensor mean(const Tensor& x) { return reduce(Reduce::mean, x); }

// Sums over the last axis: [..., n] -> [...] (rank-1 input gives [1]).
Tensor sum_last(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
// Concatenates along axis 0; trailing axes must agree.
Tensor concat(const std::vector<Tensor>& parts);
// Rows [begin, end) along axis 0.
Tensor slice(const Tensor& x, std::size_t begin, std::size_t end);

// 5-point Laplacian with replicated edges over the last two axes.
Tensor laplacian5(const Tensor& u);

// Anisotropic TV-L1 over the last two axes: sum |forward dx| + |forward dy|,
// the difference across the last row/column being zero (replicate edge).
Tensor tv_l1(const Tensor& x);

// mask * observed + (1 - mask) * x, with mask and observed constant and the
// same shape as x.
Tensor mask_blend(const Tensor& x, const Tensor& mask, const Tensor& observed);

// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets,
// evaluated in a numerically stable form. Optional non-negative weights give
// the weighted mean sum(w l) / sum(w).
Tensor bce_with_logits(const Tensor& logits, std::span<const double> targets,
                       std::span<const double> weights = {});

// Fixed sparse linear map: out[r] = sum_k weight[k] * x[index[k]] for k in
// [row_start[r], row_start[r+1]).
struct SparseMap {
  Shape out_shape;
  std::vector<std::size_t> row_start{0};
  std::vector<std::size_t> index;
  std::vector<double> weight;

  void push(std::size_t idx, double w) {
    index.push_back(idx);
    weight.push_back(w);
  }
  void end_row() { row_start.push_back(index.size()); }
  std::size_t rows() const { return row_start.size() - 1; }
};
Tensor linear_map(const Tensor& x, const SparseMap& map);

// Dense neighbourhood gather over a [C x] H x W field: [C·H·W x P].
Tensor gather_neighborhoods(const Tensor& field, std::size_t channels, std::size_t h, std::size_t w,
                            const std::vector<kernels::Offset2>& offsets, Boundary b);

}  // namespace nftm
