#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nftm/gradcheck.hpp"
#include "nftm/random.hpp"

namespace nftm {

struct GradCheckInstance {
  std::function<Tensor()> loss;
  std::vector<Tensor> params;  // leaves requiring grad
};

struct GradCheckCase {
  std::string name;
  std::function<GradCheckInstance(Rng&)> make;
};

// Every differentiable op plus the composite two-step rollouts. Random
// inputs keep a margin from kinks (relu, abs, clamp) so central differences
// do not straddle them. The straight-through binariser is absent: its
// surrogate gradient differs from the true one by construction.
std::vector<GradCheckCase> standard_gradcheck_cases();

struct GradCheckSummary {
  std::string name;
  std::size_t trials = 0;
  double max_rel_error = 0.0;
  GradCheckReport worst;
};

// Runs `trials` instances of each case whose name contains `filter`.
std::vector<GradCheckSummary> run_gradcheck_suite(std::size_t trials, double eps, std::uint64_t seed,
                                                  const std::string& filter = "");

}  // namespace nftm
