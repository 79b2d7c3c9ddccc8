#pragma once

namespace stgan {

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-7;

enum class BceKind {
  Real,      // -log D(S)
  FakeForD,  // -log(1 - D(S_hat))
  FakeForG,  // -log D(S_hat), non-saturating generator term
};

double clamp_probability(double p);

double bce_term(BceKind kind, double d_out);

// d bce_term / d d_out, evaluated at the clamped probability.
double bce_term_grad(BceKind kind, double d_out);

}  // namespace stgan
