#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "stgan/adam.hpp"
#include "stgan/model.hpp"

namespace stgan {

struct TrainConfig {
  double lr_g = 1e-3;
  double lr_d = 1e-3;
  std::size_t batch = 64;
  std::size_t epochs = 6;
  double lambda_g = 1.0;
  std::uint64_t seed = 0;
  std::size_t recent = 12;
  std::size_t trend = 7;
  std::size_t hidden = 64;
  // Windows per gradient chunk. Chunks are reduced in index order, so the
  // result does not depend on `threads`.
  std::size_t chunk = 16;
  std::size_t threads = 1;

  void validate() const;  // ConfigError
  ModelDims dims() const;
};

struct StepMetrics {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double d_loss = 0.0;
  double d_accuracy = 0.0;  // percent
  double g_mse = 0.0;       // mean over batch, nodes and features
  double g_binary_loss = 0.0;
};

// Forward results for one batch: predictions plus both discriminator outputs.
struct BatchOutputs {
  Mat prediction;  // (B*N) x F
  Vec p_real;
  Vec p_fake;
};

BatchOutputs evaluate_batch(const Generator& gen, const Discriminator& disc, const GraphOperator& g,
                            const WindowBatch& batch);

struct GeneratorLoss {
  double total = 0.0;
  double adversarial = 0.0;     // mean of -log D(fake)
  double reconstruction = 0.0;  // mean over batch of the squared error summed over nodes and features
  double mse = 0.0;             // per-element mean squared error
};

GeneratorLoss generator_loss(const BatchOutputs& out, const Mat& target, std::size_t nodes, double lambda_g);
// Mean over the 2B terms -log D(real) and -log(1 - D(fake)).
double discriminator_loss(const Vec& p_real, const Vec& p_fake);
// Percent of the 2B inputs classified correctly; D >= 0.5 counts as real.
double discriminator_accuracy(const Vec& p_real, const Vec& p_fake);

/// Gradients of both losses for one batch at the current parameters.
///
/// `gen_grads` receives dL_G/dtheta, `disc_grads` receives dL_D/dphi where
/// the fake sequences are the generator output at the same theta. Both are
/// zeroed first. Work is split into chunks of `chunk` windows.
StepMetrics compute_gradients(const Generator& gen, const Discriminator& disc, const GraphOperator& g,
                              std::span<const SampleWindow* const> windows, double lambda_g, std::size_t chunk,
                              std::size_t threads, ParameterStore& gen_grads, ParameterStore& disc_grads);

struct TrainResult {
  Generator generator;
  Discriminator discriminator;
  std::vector<StepMetrics> metrics;
};

struct TrainHooks {
  // Called after every step.
  std::function<void(const StepMetrics&)> on_step;
  // Called after every epoch with 1-based epoch number.
  std::function<void(std::size_t, const Generator&, const Discriminator&)> on_epoch;
};

/// Adversarial training: per batch one Adam step on theta for L_G, then one
/// on phi for L_D. Windows are reshuffled each epoch from the run seed; the
/// last partial batch is kept. Throws TrainingError on an empty window set
/// or a non-finite loss.
TrainResult train(const std::vector<SampleWindow>& windows, const GraphOperator& g, const TrainConfig& config,
                  const TrainHooks& hooks = {});

// Metrics CSV: epoch,step,d_loss,d_acc,g_mse,g_binary_loss
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const StepMetrics& m);

}  // namespace stgan
