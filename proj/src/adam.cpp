#include "stgan/adam.hpp"

#include <cmath>
#include <utility>

#include "stgan/errors.hpp"

namespace stgan {

AdamState AdamState::for_store(const ParameterStore& params) {
  AdamState s;
  for (const auto& e : params) {
    s.m.emplace_back(e.value.shape());
    s.v.emplace_back(e.value.shape());
  }
  return s;
}

void adam_step(ParameterStore& params, AdamState& state, const AdamConfig& config) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractViolation("adam_step: optimizer state does not match parameter store");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = params.entry(i);
    if (!e.grad_ready) throw ContractViolation("adam_step: gradient of '" + e.name + "' was never populated");
    if (state.m[i].shape() != e.value.shape()) {
      throw ContractViolation("adam_step: moment shape mismatch for '" + e.name + "'");
    }
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entry(i);
    auto w = e.value.data();
    auto g = std::as_const(e.grad).data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      w[k] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace stgan
