#pragma once

#include <string>
#include <vector>

#include "nftm/ops.hpp"
#include "nftm/optim.hpp"
#include "nftm/random.hpp"

namespace nftm {

// Fully connected stack; hidden layers use `hidden`, the last layer is linear.
// Parameters live in a ParamSet as "<prefix>.w<i>" / "<prefix>.b<i>".
struct Mlp {
  std::string prefix;
  std::vector<std::size_t> sizes;
  Pointwise hidden = Pointwise::tanh;

  static Mlp build(ParamSet& params, std::string prefix, std::vector<std::size_t> sizes, Pointwise hidden,
                   Rng& rng);
  Tensor forward(const ParamSet& params, const Tensor& x) const;
};

// Same-size convolution stack with odd square kernels.
struct ConvStack {
  std::string prefix;
  std::vector<std::size_t> channels;
  std::size_t kernel = 3;
  Boundary padding = Boundary::replicate;
  Pointwise hidden = Pointwise::relu;

  static ConvStack build(ParamSet& params, std::string prefix, std::vector<std::size_t> channels,
                         std::size_t kernel, Boundary padding, Pointwise hidden, Rng& rng);
  Tensor forward(const ParamSet& params, const Tensor& x) const;
};

// Glorot-uniform initial weights.
Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace nftm
