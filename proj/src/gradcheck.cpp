#include "nftm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nftm {

namespace {

GradCheckReport check(const std::function<Tensor()>& loss, std::vector<Tensor>& tensors,
                      const std::vector<std::string>& names, double eps) {
  for (auto& t : tensors) {
    if (!t.requires_grad() || !t.is_leaf()) {
      throw std::invalid_argument("finite_diff_check: every parameter must be a leaf requiring grad");
    }
    t.zero_grad();
  }
  const Tensor base = loss();
  base.backward();
  // Rounding error of a central difference of a loss of this size.
  const double noise = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(base.item())) / eps;
  std::vector<std::vector<double>> analytic;
  for (auto& t : tensors) analytic.emplace_back(t.grad().begin(), t.grad().end());

  GradCheckReport report;
  report.noise_floor = noise;
  for (std::size_t p = 0; p < tensors.size(); ++p) {
    auto values = tensors[p].values_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = loss().item();
      values[i] = saved - eps;
      const double down = loss().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double diff = std::fabs(analytic[p][i] - numeric);
      report.max_abs_error = std::max(report.max_abs_error, diff);
      const double rel = std::max(0.0, diff - noise) / (std::fabs(numeric) + 1e-12);
      if (rel > report.max_rel_error || report.worst_param.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        report.worst_param = names[p];
        report.worst_index = i;
        report.analytic = analytic[p][i];
        report.numeric = numeric;
      }
    }
    tensors[p].zero_grad();
  }
  return report;
}

}  // namespace

GradCheckReport finite_diff_check(const std::function<Tensor()>& loss, ParamSet& params, double eps) {
  std::vector<Tensor> tensors;
  for (auto& e : params.entries()) tensors.push_back(e.value);
  return check(loss, tensors, params.names(), eps);
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                  double eps) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < params.size(); ++i) names.push_back("arg" + std::to_string(i));
  return check(loss, params, names, eps);
}

}  // namespace nftm
