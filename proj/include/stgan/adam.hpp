#pragma once

#include <cstdint>
#include <vector>

#include "stgan/parameters.hpp"

namespace stgan {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments per parameter plus the shared step counter.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;

  static AdamState for_store(const ParameterStore& params);
};

// Bias-corrected Adam update in place. Every gradient must have been
// populated since construction (zero_grad() counts), otherwise throws
// ContractViolation.
void adam_step(ParameterStore& params, AdamState& state, const AdamConfig& config);

}  // namespace stgan
