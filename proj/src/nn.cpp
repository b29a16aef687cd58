#include "nftm/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace nftm {

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = rng.uniform(-a, a);
  return Tensor(std::move(shape), std::move(v), true);
}

Mlp Mlp::build(ParamSet& params, std::string prefix, std::vector<std::size_t> sizes, Pointwise hidden,
               Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    params.add(prefix + ".w" + std::to_string(l), glorot({sizes[l], sizes[l + 1]}, sizes[l], sizes[l + 1], rng));
    params.add(prefix + ".b" + std::to_string(l), Tensor::zeros({sizes[l + 1]}, true));
  }
  return Mlp{std::move(prefix), std::move(sizes), hidden};
}

Tensor Mlp::forward(const ParamSet& params, const Tensor& x) const {
  Tensor h = x;
  const std::size_t layers = sizes.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    h = affine(h, params.get(prefix + ".w" + std::to_string(l)), params.get(prefix + ".b" + std::to_string(l)));
    if (l + 1 < layers) h = pointwise(hidden, h);
  }
  return h;
}

ConvStack ConvStack::build(ParamSet& params, std::string prefix, std::vector<std::size_t> channels,
                           std::size_t kernel, Boundary padding, Pointwise hidden, Rng& rng) {
  if (channels.size() < 2) throw std::invalid_argument("ConvStack needs at least input and output channels");
  for (std::size_t l = 0; l + 1 < channels.size(); ++l) {
    const std::size_t fan_in = channels[l] * kernel * kernel;
    const std::size_t fan_out = channels[l + 1] * kernel * kernel;
    params.add(prefix + ".k" + std::to_string(l),
               glorot({channels[l + 1], channels[l], kernel, kernel}, fan_in, fan_out, rng));
    params.add(prefix + ".b" + std::to_string(l), Tensor::zeros({channels[l + 1]}, true));
  }
  return ConvStack{std::move(prefix), std::move(channels), kernel, padding, hidden};
}

Tensor ConvStack::forward(const ParamSet& params, const Tensor& x) const {
  Tensor h = x;
  const std::size_t layers = channels.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    h = conv2d(h, params.get(prefix + ".k" + std::to_string(l)), params.get(prefix + ".b" + std::to_string(l)),
               padding);
    if (l + 1 < layers) h = pointwise(hidden, h);
  }
  return h;
}

}  // namespace nftm
