#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "stgan/errors.hpp"
#include "stgan/trainer.hpp"
#include "toy.hpp"

using namespace stgan;

namespace {

double clamped(double p) { return std::clamp(p, 1e-7, 1.0 - 1e-7); }

Vec random_probs(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

TrainConfig toy_config() {
  TrainConfig c;
  c.hidden = 6;
  c.recent = 2;
  c.trend = 2;
  c.batch = 4;
  c.epochs = 2;
  c.seed = 77;
  c.chunk = 3;
  return c;
}

}  // namespace

TEST(Losses, EquilibriumIsLn2) {
  const Vec half = Vec::Constant(8, 0.5);
  EXPECT_NEAR(discriminator_loss(half, half), std::log(2.0), 1e-12);
  BatchOutputs out{Mat::Zero(8, 1), half, half};
  const auto gl = generator_loss(out, Mat::Zero(8, 1), 1, 1.0);
  EXPECT_NEAR(gl.adversarial, std::log(2.0), 1e-12);
  EXPECT_NEAR(gl.total, std::log(2.0), 1e-12);
  EXPECT_EQ(gl.mse, 0.0);
}

TEST(Losses, ZeroLambdaIsPureAdversarial) {
  std::mt19937_64 rng(61);
  BatchOutputs out{Mat::Random(6, 1), random_probs(rng, 2), random_probs(rng, 2)};
  const auto gl = generator_loss(out, Mat::Random(6, 1), 3, 0.0);
  EXPECT_EQ(gl.total, gl.adversarial);
  EXPECT_GT(gl.reconstruction, 0.0);
}

TEST(Losses, MatchDirectFormulas) {
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index b = 1 + static_cast<Eigen::Index>(rng() % 5), n = 3;
    Mat pred(b * n, 1), target(b * n, 1);
    for (Eigen::Index i = 0; i < b * n; ++i) {
      pred(i, 0) = u(rng);
      target(i, 0) = u(rng);
    }
    Vec real = random_probs(rng, b), fake = random_probs(rng, b);
    if (trial == 0) {
      real(0) = 0.0;
      fake(0) = 1.0;
    }
    const double lambda = 0.5 + trial;

    double d_sum = 0.0, adv = 0.0, rec = 0.0, sq = 0.0;
    for (Eigen::Index s = 0; s < b; ++s) {
      d_sum += -std::log(clamped(real(s))) - std::log(1.0 - clamped(fake(s)));
      adv += -std::log(clamped(fake(s)));
      for (Eigen::Index i = 0; i < n; ++i) {
        const double e = pred(s * n + i, 0) - target(s * n + i, 0);
        rec += e * e;
        sq += e * e;
      }
    }
    const double bd = static_cast<double>(b);
    EXPECT_NEAR(discriminator_loss(real, fake), d_sum / (2.0 * bd), 1e-12);
    const auto gl = generator_loss(BatchOutputs{pred, real, fake}, target, n, lambda);
    EXPECT_NEAR(gl.adversarial, adv / bd, 1e-12);
    EXPECT_NEAR(gl.reconstruction, rec / bd, 1e-12);
    EXPECT_NEAR(gl.total, adv / bd + lambda * rec / bd, 1e-12);
    EXPECT_NEAR(gl.mse, sq / (bd * static_cast<double>(n)), 1e-12);
  }
}

TEST(Accuracy, TieRuleAndCounting) {
  const Vec half = Vec::Constant(4, 0.5);
  EXPECT_EQ(discriminator_accuracy(half, half), 50.0);
  Vec real(2), fake(2);
  real << 0.9, 0.4;
  fake << 0.1, 0.6;
  EXPECT_EQ(discriminator_accuracy(real, fake), 50.0);
  real << 0.9, 0.7;
  fake << 0.1, 0.2;
  EXPECT_EQ(discriminator_accuracy(real, fake), 100.0);
  EXPECT_EQ(discriminator_accuracy(fake, real), 0.0);
}

TEST(Config, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.lr_g, 1e-3);
  EXPECT_EQ(c.lr_d, 1e-3);
  EXPECT_EQ(c.batch, 64u);
  EXPECT_EQ(c.epochs, 6u);
  EXPECT_EQ(c.lambda_g, 1.0);
  EXPECT_EQ(c.recent, 12u);
  EXPECT_EQ(c.trend, 7u);
  c.batch = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr_g = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ComputeGradients, LeavesParametersUntouchedAndIgnoresThreads) {
  const auto g = GraphOperator::from_graph(toy::toy_graph(4));
  const auto cfg = toy_config();
  Generator gen(cfg.dims());
  Discriminator disc(cfg.dims());
  init_parameters(gen.params(), 1);
  init_parameters(disc.params(), 2);
  const auto windows = toy::random_windows(63, 7, 4, 2, 2);
  const auto ptrs = toy::pointers(windows);
  const auto gen_sum = gen.params().checksum(), disc_sum = disc.params().checksum();

  ParameterStore gg1 = gen.params(), dg1 = disc.params(), gg2 = gen.params(), dg2 = disc.params();
  const auto m1 = compute_gradients(gen, disc, g, ptrs, 1.0, 3, 1, gg1, dg1);
  const auto m2 = compute_gradients(gen, disc, g, ptrs, 1.0, 3, 3, gg2, dg2);
  EXPECT_EQ(gen.params().checksum(), gen_sum);
  EXPECT_EQ(disc.params().checksum(), disc_sum);
  EXPECT_EQ(m1.d_loss, m2.d_loss);
  EXPECT_EQ(m1.g_mse, m2.g_mse);
  for (std::size_t i = 0; i < gg1.size(); ++i) EXPECT_EQ(gg1.grad(i), gg2.grad(i));
  for (std::size_t i = 0; i < dg1.size(); ++i) EXPECT_EQ(dg1.grad(i), dg2.grad(i));

  // Metrics match a direct evaluation of the same batch.
  const auto out = evaluate_batch(gen, disc, g, WindowBatch::from_windows(ptrs));
  EXPECT_NEAR(m1.d_loss, discriminator_loss(out.p_real, out.p_fake), 1e-12);
  EXPECT_NEAR(m1.d_accuracy, discriminator_accuracy(out.p_real, out.p_fake), 1e-12);
  const auto gl = generator_loss(out, WindowBatch::from_windows(ptrs).target, 4, 1.0);
  EXPECT_NEAR(m1.g_mse, gl.mse, 1e-12);
  EXPECT_NEAR(m1.g_binary_loss, gl.adversarial, 1e-12);
}

TEST(Train, DeterministicGivenSeed) {
  const auto g = GraphOperator::from_graph(toy::toy_graph(4));
  const auto windows = toy::random_windows(64, 10, 4, 2, 2);
  auto cfg = toy_config();
  const auto a = train(windows, g, cfg);
  cfg.threads = 2;
  const auto b = train(windows, g, cfg);
  ASSERT_EQ(a.metrics.size(), b.metrics.size());
  EXPECT_EQ(a.metrics.size(), 2u * 3u);  // 10 windows, batch 4: last partial batch kept
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    EXPECT_EQ(a.metrics[i].d_loss, b.metrics[i].d_loss);
    EXPECT_EQ(a.metrics[i].g_mse, b.metrics[i].g_mse);
  }
  EXPECT_EQ(a.generator.params().checksum(), b.generator.params().checksum());
  EXPECT_EQ(a.discriminator.params().checksum(), b.discriminator.params().checksum());

  cfg.seed = 78;
  const auto c = train(windows, g, cfg);
  EXPECT_NE(a.generator.params().checksum(), c.generator.params().checksum());
}

TEST(Train, RegressionDominatedLossDecreases) {
  const auto g = GraphOperator::from_graph(toy::toy_graph(4));
  const auto windows = toy::random_windows(65, 12, 4, 2, 2);
  auto cfg = toy_config();
  cfg.lambda_g = 1e6;
  cfg.batch = windows.size();
  cfg.epochs = 15;
  std::vector<double> mse;
  TrainHooks hooks;
  hooks.on_step = [&](const StepMetrics& m) { mse.push_back(m.g_mse); };
  train(windows, g, cfg, hooks);
  ASSERT_EQ(mse.size(), 15u);
  for (std::size_t i = 1; i < mse.size(); ++i) EXPECT_LT(mse[i], mse[i - 1]) << "step " << i;
}

TEST(Train, HooksAndErrors) {
  const auto g = GraphOperator::from_graph(toy::toy_graph(4));
  auto cfg = toy_config();
  EXPECT_THROW(train({}, g, cfg), TrainingError);
  std::vector<std::size_t> epochs;
  TrainHooks hooks;
  hooks.on_epoch = [&](std::size_t e, const Generator&, const Discriminator&) { epochs.push_back(e); };
  train(toy::random_windows(66, 5, 4, 2, 2), g, cfg, hooks);
  EXPECT_EQ(epochs, (std::vector<std::size_t>{1, 2}));
}

TEST(Metrics, CsvColumns) {
  std::ostringstream out;
  write_metrics_header(out);
  write_metrics_row(out, StepMetrics{1, 2, 0.5, 50.0, 0.01, 0.7});
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,step,d_loss,d_acc,g_mse,g_binary_loss");
  EXPECT_NE(text.find("\n1,2,"), std::string::npos);
}
