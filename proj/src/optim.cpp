#include "nftm/optim.hpp"

#include <algorithm>

#include <cmath>
#include <stdexcept>

namespace nftm {

Tensor& ParamSet::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  if (!value.requires_grad()) value = value.clone(true);
  const auto n = value.numel();
  index_[name] = entries_.size();
  names_.push_back(name);
  entries_.push_back({std::move(value), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
  return entries_.back().value;
}

Tensor& ParamSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return entries_[it->second].value;
}

const Tensor& ParamSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return entries_[it->second].value;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

void Adam::step(ParamSet& params) const {
  auto is_frozen = [&](std::size_t i) {
    return std::find(frozen.begin(), frozen.end(), params.names_[i]) != frozen.end();
  };
  for (std::size_t i = 0; i < params.entries_.size(); ++i) {
    if (!is_frozen(i) && !params.entries_[i].value.grad_populated()) {
      throw std::logic_error("adam_step: parameter '" + params.names_[i] + "' has no gradient");
    }
  }
  ++params.step_;
  const double t = static_cast<double>(params.step_);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < params.entries_.size(); ++i) {
    auto& e = params.entries_[i];
    if (is_frozen(i)) {
      e.value.zero_grad();
      continue;
    }
    auto w = e.value.values_mut();
    auto g = e.value.grad();
    for (std::size_t k = 0; k < w.size(); ++k) {
      e.m[k] = beta1 * e.m[k] + (1.0 - beta1) * g[k];
      e.v[k] = beta2 * e.v[k] + (1.0 - beta2) * g[k] * g[k];
      const double mhat = e.m[k] / c1;
      const double vhat = e.v[k] / c2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    e.value.zero_grad();
  }
}

}  // namespace nftm
