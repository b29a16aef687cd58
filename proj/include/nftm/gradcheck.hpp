#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nftm/optim.hpp"
#include "nftm/tensor.hpp"

namespace nftm {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double max_abs_error = 0.0;
  double noise_floor = 0.0;
};

// Compares reverse-mode gradients of the scalar `loss` with central
// differences of step `eps`, entry by entry, over every tensor in `params`.
// Relative error is max(0, |analytic - numeric| - noise) / (|numeric| + 1e-12),
// where noise = 16 eps_mach max(1, |L|) / eps bounds the rounding error of
// the difference quotient; without it an exactly zero gradient of a large
// loss reads as error 1. Gradients already stored in the tensors are discarded.
GradCheckReport finite_diff_check(const std::function<Tensor()>& loss, ParamSet& params, double eps = 1e-5);

// Convenience form for loose tensors; they must require grad.
GradCheckReport finite_diff_check(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                  double eps = 1e-5);

}  // namespace nftm
