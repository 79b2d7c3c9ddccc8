#include "stgan/losses.hpp"

#include <algorithm>
#include <cmath>

namespace stgan {

double clamp_probability(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

double bce_term(BceKind kind, double d_out) {
  const double p = clamp_probability(d_out);
  switch (kind) {
    case BceKind::Real:
    case BceKind::FakeForG:
      return -std::log(p);
    case BceKind::FakeForD:
      return -std::log(1.0 - p);
  }
  return 0.0;
}

double bce_term_grad(BceKind kind, double d_out) {
  const double p = clamp_probability(d_out);
  switch (kind) {
    case BceKind::Real:
    case BceKind::FakeForG:
      return -1.0 / p;
    case BceKind::FakeForD:
      return 1.0 / (1.0 - p);
  }
  return 0.0;
}

}  // namespace stgan
