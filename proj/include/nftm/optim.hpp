#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "nftm/tensor.hpp"

namespace nftm {

/// Named, ordered collection of trainable tensors plus their Adam state.
class ParamSet {
 public:
  // Registers `value` under `name` (marked requires_grad). Names are unique.
  Tensor& add(const std::string& name, Tensor value);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const std::vector<std::string>& names() const { return names_; }

  void zero_grad();

  struct Entry {
    Tensor value;
    std::vector<double> m;
    std::vector<double> v;
  };
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  long step_count() const { return step_; }

 private:
  friend struct Adam;
  std::vector<std::string> names_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  long step_ = 0;
};

struct Adam {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Parameters left untouched by step().
  std::vector<std::string> frozen;

  // Applies one bias-corrected Adam update, then zeroes the gradients. Throws
  // if a non-frozen parameter received no gradient since the last zeroing.
  void step(ParamSet& params) const;
};

}  // namespace nftm
