#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stgan/parameters.hpp"

namespace stgan {

using LossFn = std::function<double(const ParameterStore&)>;

/// Central-difference gradient estimate (f(w+eps) - f(w-eps)) / (2 eps) for
/// every scalar of every parameter. `loss` must be deterministic and pure.
std::vector<Tensor> finite_diff_grad(const LossFn& loss, const ParameterStore& params, double eps);

// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares store.grad(i) against numeric[i] entry by entry.
GradCheckReport compare_gradients(const ParameterStore& analytic, const std::vector<Tensor>& numeric);

}  // namespace stgan
