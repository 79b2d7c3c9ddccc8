#include "stgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "stgan/errors.hpp"

namespace stgan {

std::vector<Tensor> finite_diff_grad(const LossFn& loss, const ParameterStore& params, double eps) {
  ParameterStore probe = params;
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    Tensor g(probe.value(i).shape());
    auto w = probe.value(i).data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double saved = w[k];
      w[k] = saved + eps;
      const double plus = loss(probe);
      w[k] = saved - eps;
      const double minus = loss(probe);
      w[k] = saved;
      g[k] = (plus - minus) / (2.0 * eps);
    }
    out.push_back(std::move(g));
  }
  return out;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

GradCheckReport compare_gradients(const ParameterStore& analytic, const std::vector<Tensor>& numeric) {
  if (numeric.size() != analytic.size()) throw ContractViolation("compare_gradients: entry count mismatch");
  GradCheckReport report;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const Tensor& a = analytic.grad(i);
    const Tensor& n = numeric[i];
    if (a.shape() != n.shape()) throw ContractViolation("compare_gradients: shape mismatch at " + analytic.entry(i).name);
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double err = relative_error(a[k], n[k]);
      ++report.checked;
      if (err > report.max_rel_error || report.checked == 1) {
        report.max_rel_error = err;
        report.worst_parameter = analytic.entry(i).name;
        report.worst_index = k;
        report.analytic = a[k];
        report.numeric = n[k];
      }
    }
  }
  return report;
}

}  // namespace stgan
