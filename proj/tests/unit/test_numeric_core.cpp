#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stgan/adam.hpp"
#include "stgan/errors.hpp"
#include "stgan/gradcheck.hpp"
#include "stgan/losses.hpp"
#include "stgan/tensor.hpp"

using namespace stgan;

namespace {

Tensor random_tensor(std::mt19937_64& rng, Shape shape) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.dim(1); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  }
  return c;
}

}  // namespace

TEST(Tensor, ConstructorChecksDataLength) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  const Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_DOUBLE_EQ(t.at(1, 0), 4.0);
}

TEST(Tensor, MatmulIdentity) {
  const Tensor id = Tensor::matrix2d({{1, 0}, {0, 1}});
  const Tensor x = Tensor::matrix2d({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(id, x), x);
}

TEST(Tensor, MatmulRowTimesColumn) {
  const Tensor c = matmul(Tensor::matrix2d({{1, 2}}), Tensor::matrix2d({{3}, {4}}));
  ASSERT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_EQ(c[0], 11.0);
}

TEST(Tensor, MatmulMatchesTripleLoop) {
  std::mt19937_64 rng(5);
  const Tensor a = random_tensor(rng, {5, 7});
  const Tensor b = random_tensor(rng, {7, 3});
  EXPECT_LT(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-12);
}

TEST(Tensor, MatmulShapeErrorNamesBothShapes) {
  try {
    matmul(Tensor({2, 3}), Tensor({4, 5}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

TEST(Tensor, MatmulAssociativity) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_tensor(rng, {4, 6});
    const Tensor b = random_tensor(rng, {6, 5});
    const Tensor c = random_tensor(rng, {5, 3});
    const Tensor left = matmul(matmul(a, b), c);
    const Tensor right = matmul(a, matmul(b, c));
    double scale = 0.0;
    for (double v : left.data()) scale = std::max(scale, std::abs(v));
    EXPECT_LE(max_abs_diff(left, right), 1e-9 * std::max(scale, 1.0));
  }
}

TEST(Tensor, TransposeRoundTrip) {
  std::mt19937_64 rng(7);
  const Tensor a = random_tensor(rng, {3, 4});
  EXPECT_EQ(transpose(transpose(a)), a);
  EXPECT_EQ(transpose(a).at(2, 1), a.at(1, 2));
}

TEST(Activation, FixedPoints) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(activation(Activation::Tanh, Tensor({1}, 0.0))[0], 0.0);
  EXPECT_EQ(activation(Activation::Sigmoid, Tensor({1}, 0.0))[0], 0.5);
}

TEST(Activation, SigmoidSymmetryAndRange) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    EXPECT_NEAR(sigmoid(-x), 1.0 - sigmoid(x), 1e-12);
    EXPECT_GT(sigmoid(x), 0.0);
    EXPECT_LT(sigmoid(x), 1.0);
  }
  // Stable at extreme arguments.
  EXPECT_TRUE(std::isfinite(sigmoid(-1000.0)));
  EXPECT_EQ(sigmoid(1000.0), 1.0);
}

TEST(Activation, TanhRange) {
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor(rng, {10, 10});
  const Tensor y = activation(Activation::Tanh, x);
  for (double v : y.data()) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Losses, EquilibriumTermsAreLn2) {
  EXPECT_NEAR(bce_term(BceKind::Real, 0.5), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_term(BceKind::FakeForD, 0.5), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_term(BceKind::FakeForG, 0.5), std::log(2.0), 1e-15);
}

TEST(Losses, ClampKeepsTermsFinite) {
  // -log(1e-7) = 16.118...
  EXPECT_NEAR(bce_term(BceKind::Real, 0.0), -std::log(1e-7), 1e-12);
  EXPECT_NEAR(bce_term(BceKind::Real, 0.0), 16.11809565095832, 1e-9);
  EXPECT_NEAR(bce_term(BceKind::FakeForD, 1.0), -std::log(1e-7), 1e-6);
  EXPECT_NEAR(bce_term(BceKind::Real, 1.0), -std::log(1.0 - 1e-7), 1e-15);
  EXPECT_TRUE(std::isfinite(bce_term_grad(BceKind::Real, 0.0)));
  EXPECT_TRUE(std::isfinite(bce_term_grad(BceKind::FakeForD, 1.0)));
}

TEST(Losses, GradientMatchesDerivative) {
  for (double p : {0.1, 0.37, 0.5, 0.93}) {
    const double h = 1e-6;
    for (auto kind : {BceKind::Real, BceKind::FakeForD, BceKind::FakeForG}) {
      const double numeric = (bce_term(kind, p + h) - bce_term(kind, p - h)) / (2 * h);
      EXPECT_NEAR(bce_term_grad(kind, p), numeric, 1e-6);
    }
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterStore p;
  const auto w = p.add("w", {1});
  p.value(w)[0] = 0.3;
  p.grad(w)[0] = 1.0;
  AdamState s = AdamState::for_store(p);
  adam_step(p, s, AdamConfig{0.001, 0.9, 0.999, 1e-8});
  EXPECT_EQ(s.t, 1u);
  EXPECT_NEAR(p.value(w)[0], 0.3 - 0.001 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, MatchesScalarRecurrenceOracle) {
  ParameterStore p;
  const auto w = p.add("w", {1});
  p.value(w)[0] = 1.0;
  AdamState s = AdamState::for_store(p);
  const AdamConfig cfg{0.05, 0.9, 0.999, 1e-8};
  double x = 1.0, m = 0.0, v = 0.0;
  double prev = p.value(w)[0];
  for (int t = 1; t <= 10; ++t) {
    p.zero_grad();
    p.grad(w)[0] = 2.0 * p.value(w)[0];  // d/dw w^2
    adam_step(p, s, cfg);
    const double g = 2.0 * x;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= cfg.lr * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p.value(w)[0], x, 1e-14);
    EXPECT_LT(p.value(w)[0], prev);
    prev = p.value(w)[0];
    EXPECT_EQ(s.t, static_cast<std::uint64_t>(t));
  }
}

TEST(Adam, ZeroGradientFromFreshStateIsNoOp) {
  ParameterStore p;
  const auto a = p.add("a", {2, 3});
  const auto b = p.add("b", {3});
  std::mt19937_64 rng(10);
  p.value(a) = random_tensor(rng, {2, 3});
  p.value(b) = random_tensor(rng, {3});
  const ParameterStore before = p;
  p.zero_grad();
  AdamState s = AdamState::for_store(p);
  adam_step(p, s, AdamConfig{});
  EXPECT_EQ(p.value(a), before.value(a));
  EXPECT_EQ(p.value(b), before.value(b));
  EXPECT_EQ(s.t, 1u);
  for (const auto& m : s.m) {
    for (double x : m.data()) EXPECT_EQ(x, 0.0);
  }
  for (const auto& v : s.v) {
    for (double x : v.data()) EXPECT_EQ(x, 0.0);
  }
}

TEST(Adam, UnpopulatedGradientIsContractViolation) {
  ParameterStore p;
  p.add("a", {2});
  p.add("b", {2});
  p.grad(0)[0] = 1.0;
  AdamState s = AdamState::for_store(p);
  EXPECT_THROW(adam_step(p, s, AdamConfig{}), ContractViolation);
  EXPECT_EQ(s.t, 0u);
}

TEST(ParameterStore, InsertionOrderAndDuplicates) {
  ParameterStore p;
  p.add("z", {1});
  p.add("a", {2});
  p.add("m", {3});
  std::vector<std::string> names;
  for (const auto& e : p) names.push_back(e.name);
  EXPECT_EQ(names, (std::vector<std::string>{"z", "a", "m"}));
  EXPECT_THROW(p.add("a", {1}), ContractViolation);
  for (const auto& e : p) EXPECT_EQ(e.value.shape(), e.grad.shape());
  EXPECT_EQ(p.scalar_count(), 6u);
}

TEST(ParameterStore, ChecksumTracksValues) {
  ParameterStore p;
  const auto w = p.add("w", {3});
  const auto before = p.checksum();
  p.grad(w)[0] = 5.0;
  EXPECT_EQ(p.checksum(), before);
  p.value(w)[1] = 1e-300;
  EXPECT_NE(p.checksum(), before);
}

TEST(FiniteDiff, QuadraticAndConstant) {
  ParameterStore p;
  const auto w = p.add("w", {1});
  p.value(w)[0] = 3.0;
  const auto g = finite_diff_grad([&](const ParameterStore& s) { return s.value(w)[0] * s.value(w)[0]; }, p, 1e-5);
  EXPECT_NEAR(g[0][0], 6.0, 1e-8);
  const auto z = finite_diff_grad([](const ParameterStore&) { return 4.2; }, p, 1e-5);
  EXPECT_EQ(z[0][0], 0.0);
  // The probe never leaks into the caller's store.
  EXPECT_EQ(p.value(w)[0], 3.0);
}

TEST(FiniteDiff, RelativeErrorFloor) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1e-12, 0.0), 1e-4);
}
