#include "stgan/model.hpp"

#include "stgan/errors.hpp"
#include "stgan/losses.hpp"

namespace stgan {

namespace {

// Copies slice k of an L x N x F tensor into rows [row0, row0+N) of `dst`.
void copy_slice(const Tensor& t, std::size_t k, Mat& dst, Eigen::Index row0) {
  const auto n = static_cast<Eigen::Index>(t.dim(1));
  const auto f = static_cast<Eigen::Index>(t.dim(2));
  const double* src = t.data().data() + k * t.dim(1) * t.dim(2);
  dst.middleRows(row0, n) = ConstMatMap(src, n, f);
}

}  // namespace

WindowBatch WindowBatch::from_windows(std::span<const SampleWindow* const> windows) {
  if (windows.empty()) throw ContractViolation("WindowBatch: no windows");
  const SampleWindow& first = *windows.front();
  WindowBatch b;
  b.size = windows.size();
  b.nodes = first.target.dim(0);
  const std::size_t f = first.target.dim(1);
  const auto n = static_cast<Eigen::Index>(b.nodes);
  const auto rows = static_cast<Eigen::Index>(b.size * b.nodes);
  const std::size_t l_r = first.recent.dim(0);
  const std::size_t l_d = first.trend.dim(0);

  b.recent.assign(l_r, Mat(rows, static_cast<Eigen::Index>(f)));
  b.trend.assign(l_d, Mat(rows, static_cast<Eigen::Index>(f)));
  b.external.resize(static_cast<Eigen::Index>(b.size), static_cast<Eigen::Index>(first.external.size()));
  b.target.resize(rows, static_cast<Eigen::Index>(f));

  for (std::size_t s = 0; s < b.size; ++s) {
    const SampleWindow& w = *windows[s];
    if (w.recent.dim(0) != l_r || w.trend.dim(0) != l_d || w.target.dim(0) != b.nodes) {
      throw DimensionError("WindowBatch: windows have inconsistent shapes");
    }
    const Eigen::Index row0 = static_cast<Eigen::Index>(s) * n;
    for (std::size_t k = 0; k < l_r; ++k) copy_slice(w.recent, k, b.recent[k], row0);
    for (std::size_t k = 0; k < l_d; ++k) copy_slice(w.trend, k, b.trend[k], row0);
    for (std::size_t j = 0; j < w.external.size(); ++j) {
      b.external(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = w.external[j];
    }
    b.target.middleRows(row0, n) = w.target.matrix();
  }
  return b;
}

WindowBatch WindowBatch::from_window(const SampleWindow& window) {
  const SampleWindow* p = &window;
  return from_windows(std::span<const SampleWindow* const>(&p, 1));
}

std::vector<Mat> sequence_slices(const Tensor& sequence) {
  if (sequence.rank() != 3) throw DimensionError("sequence must be L x N x F, got " + shape_string(sequence.shape()));
  std::vector<Mat> out(sequence.dim(0), Mat(static_cast<Eigen::Index>(sequence.dim(1)), static_cast<Eigen::Index>(sequence.dim(2))));
  for (std::size_t k = 0; k < sequence.dim(0); ++k) copy_slice(sequence, k, out[k], 0);
  return out;
}

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(const ModelDims& dims) : dims_(dims) {
  const std::size_t d = dims.hidden;
  recent1_ = GcgruLayer(params_, "gen/recent1", dims.features, d);
  recent2_ = GcgruLayer(params_, "gen/recent2", d, d);
  trend1_ = LstmLayer(params_, "gen/trend1", dims.features, d);
  trend2_ = LstmLayer(params_, "gen/trend2", d, d);
  external_ = DenseLayer(params_, "gen/external", dims.time_features, d, DenseActivation::Tanh);
  fusion_ = DenseLayer(params_, "gen/fusion", 3 * d, d, DenseActivation::Tanh);
  theta_out_ = params_.add("gen/output/Theta", {d, dims.features});
  b_out_ = params_.add("gen/output/b", {1, dims.features});
}

Mat Generator::forward(const GraphOperator& g, const WindowBatch& batch, Cache* cache) const {
  if (batch.recent.size() != dims_.recent || batch.trend.size() != dims_.trend) {
    throw DimensionError("generator expects " + std::to_string(dims_.recent) + " recent and " +
                         std::to_string(dims_.trend) + " trend slices, got " + std::to_string(batch.recent.size()) +
                         " and " + std::to_string(batch.trend.size()));
  }
  if (batch.nodes != g.nodes()) throw DimensionError("generator: batch node count does not match the graph");
  const auto d = static_cast<Eigen::Index>(dims_.hidden);
  const auto rows = static_cast<Eigen::Index>(batch.size * batch.nodes);
  const ParameterStore& p = params_;
  if (cache) {
    cache->recent1.resize(dims_.recent);
    cache->recent2.resize(dims_.recent);
    cache->trend1.resize(dims_.trend);
    cache->trend2.resize(dims_.trend);
  }

  Mat h1 = Mat::Zero(rows, d);
  Mat h2 = Mat::Zero(rows, d);
  for (std::size_t t = 0; t < dims_.recent; ++t) {
    h1 = recent1_.forward(g, batch.recent[t], h1, p, cache ? &cache->recent1[t] : nullptr);
    h2 = recent2_.forward(g, h1, h2, p, cache ? &cache->recent2[t] : nullptr);
  }

  LstmLayer::State s1{Mat::Zero(rows, d), Mat::Zero(rows, d)};
  LstmLayer::State s2 = s1;
  for (std::size_t k = 0; k < dims_.trend; ++k) {
    s1 = trend1_.forward(batch.trend[k], s1, p, cache ? &cache->trend1[k] : nullptr);
    s2 = trend2_.forward(s1.h, s2, p, cache ? &cache->trend2[k] : nullptr);
  }

  const Mat ext = external_.forward(batch.external, p, cache ? &cache->external : nullptr);

  Mat concat(rows, 3 * d);
  concat.leftCols(d) = h2;
  concat.middleCols(d, d) = s2.h;
  concat.rightCols(d) = broadcast_rows(ext, batch.nodes);
  const Mat fused = fusion_.forward(concat, p, cache ? &cache->fusion : nullptr);

  Mat fused_prop = g.propagate(fused);
  Mat pre = fused_prop * p.value(theta_out_).matrix();
  pre.rowwise() += p.value(b_out_).matrix().row(0);
  Mat prediction = sigmoid(pre);
  if (cache) {
    cache->fused_prop = std::move(fused_prop);
    cache->prediction = prediction;
    cache->valid = true;
  }
  return prediction;
}

void Generator::backward(const GraphOperator& g, const WindowBatch& batch, const Cache& cache, const Mat& d_prediction,
                         ParameterStore& grads) const {
  if (!cache.valid) throw ContractViolation("generator backward called without a cached forward pass");
  const auto d = static_cast<Eigen::Index>(dims_.hidden);
  const ParameterStore& p = params_;

  const Mat d_pre = (d_prediction.array() * cache.prediction.array() * (1.0 - cache.prediction.array())).matrix();
  grads.grad(theta_out_).matrix().noalias() += cache.fused_prop.transpose() * d_pre;
  grads.grad(b_out_).matrix().row(0) += d_pre.colwise().sum();
  const Mat d_fused = g.propagate_transposed(d_pre * p.value(theta_out_).matrix().transpose());

  const Mat d_concat = fusion_.backward(cache.fusion, d_fused, p, &grads);
  external_.backward(cache.external, sum_node_blocks(d_concat.rightCols(d), batch.nodes), p, &grads);

  // Trend LSTM stack, back through time.
  {
    const auto rows = d_concat.rows();
    Mat dh2 = d_concat.middleCols(d, d);
    Mat dc2 = Mat::Zero(rows, d);
    Mat dh1 = Mat::Zero(rows, d);
    Mat dc1 = Mat::Zero(rows, d);
    Mat dx, dh_prev, dc_prev;
    for (std::size_t k = dims_.trend; k-- > 0;) {
      trend2_.backward(cache.trend2[k], dh2, dc2, p, &grads, &dx, dh_prev, dc_prev);
      dh2 = std::move(dh_prev);
      dc2 = std::move(dc_prev);
      dh1 += dx;
      trend1_.backward(cache.trend1[k], dh1, dc1, p, &grads, nullptr, dh_prev, dc_prev);
      dh1 = std::move(dh_prev);
      dc1 = std::move(dc_prev);
    }
  }

  // Recent GCGRU stack.
  {
    Mat dh2 = d_concat.leftCols(d);
    Mat dh1 = Mat::Zero(dh2.rows(), d);
    Mat dx, dh_prev;
    for (std::size_t t = dims_.recent; t-- > 0;) {
      recent2_.backward(g, cache.recent2[t], dh2, p, &grads, &dx, dh_prev);
      dh2 = std::move(dh_prev);
      dh1 += dx;
      recent1_.backward(g, cache.recent1[t], dh1, p, &grads, nullptr, dh_prev);
      dh1 = std::move(dh_prev);
    }
  }
}

Tensor Generator::generate(const GraphOperator& g, const SampleWindow& window) const {
  return Tensor::from_matrix(forward(g, WindowBatch::from_window(window), nullptr));
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(const ModelDims& dims) : dims_(dims) {
  const std::size_t d = dims.hidden;
  gru_ = GcgruLayer(params_, "disc/gru", dims.features, d);
  gru_readout_ = DenseLayer(params_, "disc/gru_readout", d, d, DenseActivation::Tanh);
  gcn_theta_ = params_.add("disc/gcn/Theta", {dims.features, d});
  gcn_b_ = params_.add("disc/gcn/b", {1, d});
  gcn_readout_ = DenseLayer(params_, "disc/gcn_readout", d, d, DenseActivation::Tanh);
  fusion_ = DenseLayer(params_, "disc/fusion", 2 * d, 1, DenseActivation::Identity);
}

Discriminator::Prefix Discriminator::forward_prefix(const GraphOperator& g, std::span<const Mat> slices,
                                                    bool keep_cache) const {
  if (slices.empty()) throw DimensionError("discriminator prefix needs at least one slice");
  Prefix prefix;
  prefix.h = Mat::Zero(slices.front().rows(), static_cast<Eigen::Index>(dims_.hidden));
  if (keep_cache) prefix.steps.resize(slices.size());
  for (std::size_t t = 0; t < slices.size(); ++t) {
    prefix.h = gru_.forward(g, slices[t], prefix.h, params_, keep_cache ? &prefix.steps[t] : nullptr);
  }
  return prefix;
}

Vec Discriminator::forward_head(const GraphOperator& g, const Prefix& prefix, const Mat& last, HeadCache* cache) const {
  const ParameterStore& p = params_;
  const auto d = static_cast<Eigen::Index>(dims_.hidden);
  const auto n = static_cast<Eigen::Index>(g.nodes());
  if (last.rows() != prefix.h.rows() || last.rows() % n != 0) {
    throw DimensionError("discriminator: final slice does not match the prefix batch");
  }
  const auto batch = last.rows() / n;

  const Mat h = gru_.forward(g, last, prefix.h, p, cache ? &cache->step : nullptr);
  const Mat q = gru_readout_.forward(h, p, cache ? &cache->gru_readout : nullptr);

  Mat gcn_input_prop = g.propagate(last);
  Mat gcn = gcn_input_prop * p.value(gcn_theta_).matrix();
  gcn.rowwise() += p.value(gcn_b_).matrix().row(0);
  gcn = tanh(gcn);
  const Mat s = gcn_readout_.forward(gcn, p, cache ? &cache->gcn_readout : nullptr);

  Mat pooled(batch, 2 * d);
  for (Eigen::Index b = 0; b < batch; ++b) {
    pooled.row(b).head(d) = g.pool_weights.transpose() * q.middleRows(b * n, n);
    pooled.row(b).tail(d) = s.middleRows(b * n, n).colwise().mean();
  }
  const Mat logit = fusion_.forward(pooled, p, cache ? &cache->fusion : nullptr);

  Vec raw(batch), prob(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    raw(b) = sigmoid(logit(b, 0));
    prob(b) = clamp_probability(raw(b));
  }
  if (cache) {
    cache->last = last;
    cache->gcn_input_prop = std::move(gcn_input_prop);
    cache->gcn = std::move(gcn);
    cache->raw_prob = raw;
    cache->valid = true;
  }
  return prob;
}

Mat Discriminator::backward_head(const GraphOperator& g, const Prefix& prefix, const HeadCache& cache, const Vec& d_prob,
                                 ParameterStore* grads, Mat* d_prefix_h) const {
  (void)prefix;
  if (!cache.valid) throw ContractViolation("discriminator backward called without a cached forward pass");
  const ParameterStore& p = params_;
  const auto d = static_cast<Eigen::Index>(dims_.hidden);
  const auto n = static_cast<Eigen::Index>(g.nodes());
  const auto batch = cache.raw_prob.size();

  Mat d_logit(batch, 1);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double r = cache.raw_prob(b);
    const bool clamped = r < kProbClamp || r > 1.0 - kProbClamp;
    d_logit(b, 0) = clamped ? 0.0 : d_prob(b) * r * (1.0 - r);
  }
  const Mat d_pooled = fusion_.backward(cache.fusion, d_logit, p, grads);

  const auto rows = cache.last.rows();
  Mat d_q(rows, d), d_s(rows, d);
  for (Eigen::Index b = 0; b < batch; ++b) {
    d_q.middleRows(b * n, n).noalias() = g.pool_weights * d_pooled.row(b).head(d);
    d_s.middleRows(b * n, n).rowwise() = d_pooled.row(b).tail(d) / static_cast<double>(n);
  }

  const Mat d_h = gru_readout_.backward(cache.gru_readout, d_q, p, grads);
  const Mat d_gcn = gcn_readout_.backward(cache.gcn_readout, d_s, p, grads);
  const Mat d_gcn_pre = (d_gcn.array() * (1.0 - cache.gcn.array().square())).matrix();
  if (grads) {
    grads->grad(gcn_theta_).matrix().noalias() += cache.gcn_input_prop.transpose() * d_gcn_pre;
    grads->grad(gcn_b_).matrix().row(0) += d_gcn_pre.colwise().sum();
  }
  Mat d_last = g.propagate_transposed(d_gcn_pre * p.value(gcn_theta_).matrix().transpose());

  Mat d_last_gru, d_h_prev;
  gru_.backward(g, cache.step, d_h, p, grads, &d_last_gru, d_h_prev);
  d_last += d_last_gru;
  if (d_prefix_h) {
    if (d_prefix_h->size() == 0) {
      *d_prefix_h = std::move(d_h_prev);
    } else {
      *d_prefix_h += d_h_prev;
    }
  }
  return d_last;
}

void Discriminator::backward_prefix(const GraphOperator& g, const Prefix& prefix, const Mat& d_h,
                                    ParameterStore& grads) const {
  if (prefix.steps.empty()) throw ContractViolation("discriminator prefix was computed without a cache");
  Mat dh = d_h;
  Mat dh_prev;
  for (std::size_t t = prefix.steps.size(); t-- > 0;) {
    gru_.backward(g, prefix.steps[t], dh, params_, &grads, nullptr, dh_prev);
    dh = std::move(dh_prev);
  }
}

Vec Discriminator::discriminate(const GraphOperator& g, std::span<const Mat> sequence) const {
  if (sequence.size() != dims_.recent + 1) {
    throw DimensionError("discriminator expects a sequence of " + std::to_string(dims_.recent + 1) + " slices, got " +
                         std::to_string(sequence.size()));
  }
  const Prefix prefix = forward_prefix(g, sequence.first(dims_.recent), false);
  return forward_head(g, prefix, sequence.back(), nullptr);
}

double Discriminator::discriminate(const GraphOperator& g, const Tensor& sequence) const {
  const auto slices = sequence_slices(sequence);
  return discriminate(g, std::span<const Mat>(slices))(0);
}

}  // namespace stgan
