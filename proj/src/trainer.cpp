#include "stgan/trainer.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "stgan/csv.hpp"
#include "stgan/errors.hpp"
#include "stgan/losses.hpp"

namespace stgan {

void TrainConfig::validate() const {
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ConfigError("learning rates must be positive");
  if (batch == 0) throw ConfigError("batch size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(lambda_g >= 0.0) || !std::isfinite(lambda_g)) throw ConfigError("lambda_g must be finite and >= 0");
  if (recent == 0 || trend == 0) throw ConfigError("window lengths must be positive");
  if (hidden == 0) throw ConfigError("hidden size must be positive");
  if (chunk == 0) throw ConfigError("chunk size must be positive");
  if (threads == 0) throw ConfigError("threads must be positive");
}

ModelDims TrainConfig::dims() const {
  ModelDims d;
  d.hidden = hidden;
  d.recent = recent;
  d.trend = trend;
  return d;
}

BatchOutputs evaluate_batch(const Generator& gen, const Discriminator& disc, const GraphOperator& g,
                            const WindowBatch& batch) {
  BatchOutputs out;
  out.prediction = gen.forward(g, batch, nullptr);
  const auto prefix = disc.forward_prefix(g, batch.recent, false);
  out.p_real = disc.forward_head(g, prefix, batch.target, nullptr);
  out.p_fake = disc.forward_head(g, prefix, out.prediction, nullptr);
  return out;
}

GeneratorLoss generator_loss(const BatchOutputs& out, const Mat& target, std::size_t nodes, double lambda_g) {
  const auto b = out.p_fake.size();
  if (b == 0) throw ContractViolation("generator_loss: empty batch");
  if (out.prediction.rows() != target.rows() || out.prediction.cols() != target.cols() ||
      out.prediction.rows() != static_cast<Eigen::Index>(b * nodes)) {
    throw DimensionError("generator_loss: prediction/target shape mismatch");
  }
  GeneratorLoss loss;
  for (Eigen::Index i = 0; i < b; ++i) loss.adversarial += bce_term(BceKind::FakeForG, out.p_fake(i));
  loss.adversarial /= static_cast<double>(b);
  const double sq = (out.prediction - target).squaredNorm();
  loss.reconstruction = sq / static_cast<double>(b);
  loss.mse = sq / static_cast<double>(target.size());
  loss.total = loss.adversarial + lambda_g * loss.reconstruction;
  return loss;
}

double discriminator_loss(const Vec& p_real, const Vec& p_fake) {
  if (p_real.size() == 0 || p_real.size() != p_fake.size()) throw DimensionError("discriminator_loss: batch mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < p_real.size(); ++i) s += bce_term(BceKind::Real, p_real(i));
  for (Eigen::Index i = 0; i < p_fake.size(); ++i) s += bce_term(BceKind::FakeForD, p_fake(i));
  return s / static_cast<double>(2 * p_real.size());
}

double discriminator_accuracy(const Vec& p_real, const Vec& p_fake) {
  if (p_real.size() == 0 || p_real.size() != p_fake.size()) {
    throw DimensionError("discriminator_accuracy: batch mismatch");
  }
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < p_real.size(); ++i) correct += p_real(i) >= 0.5 ? 1 : 0;
  for (Eigen::Index i = 0; i < p_fake.size(); ++i) correct += p_fake(i) >= 0.5 ? 0 : 1;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(2 * p_real.size());
}

namespace {

struct ChunkSums {
  double adversarial = 0.0;  // sum of -log D(fake)
  double d_terms = 0.0;      // sum of both discriminator terms
  double squared_error = 0.0;
  std::size_t correct = 0;
};

// Accumulates this chunk's share of the batch-mean gradients.
ChunkSums chunk_gradients(const Generator& gen, const Discriminator& disc, const GraphOperator& g,
                          std::span<const SampleWindow* const> windows, std::size_t batch_size, double lambda_g,
                          ParameterStore& gen_grads, ParameterStore& disc_grads) {
  const WindowBatch wb = WindowBatch::from_windows(windows);
  const double inv_b = 1.0 / static_cast<double>(batch_size);
  const auto n = static_cast<Eigen::Index>(wb.size);

  Generator::Cache gc;
  const Mat pred = gen.forward(g, wb, &gc);
  const auto prefix = disc.forward_prefix(g, wb.recent, true);
  Discriminator::HeadCache real_cache, fake_cache;
  const Vec p_real = disc.forward_head(g, prefix, wb.target, &real_cache);
  const Vec p_fake = disc.forward_head(g, prefix, pred, &fake_cache);

  ChunkSums sums;
  Vec d_fake_g(n), d_real_d(n), d_fake_d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sums.adversarial += bce_term(BceKind::FakeForG, p_fake(i));
    sums.d_terms += bce_term(BceKind::Real, p_real(i)) + bce_term(BceKind::FakeForD, p_fake(i));
    sums.correct += (p_real(i) >= 0.5 ? 1 : 0) + (p_fake(i) >= 0.5 ? 0 : 1);
    d_fake_g(i) = bce_term_grad(BceKind::FakeForG, p_fake(i)) * inv_b;
    d_real_d(i) = bce_term_grad(BceKind::Real, p_real(i)) * 0.5 * inv_b;
    d_fake_d(i) = bce_term_grad(BceKind::FakeForD, p_fake(i)) * 0.5 * inv_b;
  }
  const Mat diff = pred - wb.target;
  sums.squared_error = diff.squaredNorm();

  // Generator: adversarial path through the frozen discriminator plus reconstruction.
  Mat d_pred = disc.backward_head(g, prefix, fake_cache, d_fake_g, nullptr, nullptr);
  d_pred += (2.0 * lambda_g * inv_b) * diff;
  gen.backward(g, wb, gc, d_pred, gen_grads);

  // Discriminator: fake treated as a constant input.
  Mat d_prefix;
  disc.backward_head(g, prefix, real_cache, d_real_d, &disc_grads, &d_prefix);
  disc.backward_head(g, prefix, fake_cache, d_fake_d, &disc_grads, &d_prefix);
  disc.backward_prefix(g, prefix, d_prefix, disc_grads);
  return sums;
}

}  // namespace

StepMetrics compute_gradients(const Generator& gen, const Discriminator& disc, const GraphOperator& g,
                              std::span<const SampleWindow* const> windows, double lambda_g, std::size_t chunk,
                              std::size_t threads, ParameterStore& gen_grads, ParameterStore& disc_grads) {
  if (windows.empty()) throw TrainingError("compute_gradients: empty batch");
  if (chunk == 0) throw ConfigError("chunk size must be positive");
  const std::size_t b = windows.size();
  const std::size_t n_chunks = (b + chunk - 1) / chunk;

  std::vector<ParameterStore> g_parts(n_chunks, gen.params());
  std::vector<ParameterStore> d_parts(n_chunks, disc.params());
  std::vector<ChunkSums> sums(n_chunks);
  auto run = [&](std::size_t k) {
    g_parts[k].zero_grad();
    d_parts[k].zero_grad();
    const std::size_t lo = k * chunk;
    const std::size_t len = std::min(chunk, b - lo);
    sums[k] = chunk_gradients(gen, disc, g, windows.subspan(lo, len), b, lambda_g, g_parts[k], d_parts[k]);
  };

  const std::size_t workers = std::min(threads, n_chunks);
  if (workers <= 1) {
    for (std::size_t k = 0; k < n_chunks; ++k) run(k);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = w; k < n_chunks; k += workers) run(k);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  gen_grads.zero_grad();
  disc_grads.zero_grad();
  ChunkSums total;
  for (std::size_t k = 0; k < n_chunks; ++k) {
    gen_grads.accumulate_gradients(g_parts[k]);
    disc_grads.accumulate_gradients(d_parts[k]);
    total.adversarial += sums[k].adversarial;
    total.d_terms += sums[k].d_terms;
    total.squared_error += sums[k].squared_error;
    total.correct += sums[k].correct;
  }

  const std::size_t elements = b * windows.front()->target.size();
  StepMetrics m;
  m.d_loss = total.d_terms / static_cast<double>(2 * b);
  m.d_accuracy = 100.0 * static_cast<double>(total.correct) / static_cast<double>(2 * b);
  m.g_mse = total.squared_error / static_cast<double>(elements);
  m.g_binary_loss = total.adversarial / static_cast<double>(b);
  return m;
}

TrainResult train(const std::vector<SampleWindow>& windows, const GraphOperator& g, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  if (windows.empty()) throw TrainingError("no training windows (dataset too short for the window lengths?)");

  const ModelDims dims = config.dims();
  TrainResult result{Generator(dims), Discriminator(dims), {}};
  Generator& gen = result.generator;
  Discriminator& disc = result.discriminator;
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32), 0x5354'4741u};
  std::vector<std::uint64_t> seeds(3);
  seq.generate(seeds.begin(), seeds.end());
  init_parameters(gen.params(), seeds[0]);
  init_parameters(disc.params(), seeds[1]);
  std::mt19937_64 shuffle_rng(seeds[2]);

  AdamState adam_g = AdamState::for_store(gen.params());
  AdamState adam_d = AdamState::for_store(disc.params());
  const AdamConfig cfg_g{config.lr_g};
  const AdamConfig cfg_d{config.lr_d};

  std::vector<const SampleWindow*> order(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) order[i] = &windows[i];

  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    // Fisher-Yates with a fixed reduction so the order is library-independent.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng() % i]);
    }
    for (std::size_t lo = 0; lo < order.size(); lo += config.batch) {
      const std::size_t len = std::min(config.batch, order.size() - lo);
      const std::span<const SampleWindow* const> batch(order.data() + lo, len);
      StepMetrics m = compute_gradients(gen, disc, g, batch, config.lambda_g, config.chunk, config.threads,
                                        gen.params(), disc.params());
      m.epoch = epoch;
      m.step = ++step;
      if (!std::isfinite(m.d_loss) || !std::isfinite(m.g_mse) || !std::isfinite(m.g_binary_loss)) {
        throw TrainingError("non-finite loss at step " + std::to_string(step));
      }
      adam_step(gen.params(), adam_g, cfg_g);
      adam_step(disc.params(), adam_d, cfg_d);
      result.metrics.push_back(m);
      if (hooks.on_step) hooks.on_step(m);
    }
    if (hooks.on_epoch) hooks.on_epoch(epoch, gen, disc);
  }
  return result;
}

void write_metrics_header(std::ostream& out) { out << "epoch,step,d_loss,d_acc,g_mse,g_binary_loss\n"; }

void write_metrics_row(std::ostream& out, const StepMetrics& m) {
  out << m.epoch << ',' << m.step << ',' << format_double(m.d_loss) << ',' << format_double(m.d_accuracy) << ','
      << format_double(m.g_mse) << ',' << format_double(m.g_binary_loss) << '\n';
}

}  // namespace stgan
