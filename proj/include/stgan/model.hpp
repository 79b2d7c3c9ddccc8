#pragma once

#include <span>
#include <vector>

#include "stgan/layers.hpp"
#include "stgan/preprocess.hpp"

namespace stgan {

struct ModelDims {
  std::size_t hidden = 64;
  std::size_t features = 1;
  std::size_t recent = 12;  // L_r
  std::size_t trend = 7;    // L_d
  std::size_t time_features = kTimeFeatureSize;
};

/// B windows stacked node-major: every (B*N) x F matrix holds sample b in
/// rows [b*N, (b+1)*N).
struct WindowBatch {
  std::size_t size = 0;
  std::size_t nodes = 0;
  std::vector<Mat> recent;  // L_r slices
  std::vector<Mat> trend;   // L_d slices
  Mat external;             // B x 31
  Mat target;               // (B*N) x F

  static WindowBatch from_windows(std::span<const SampleWindow* const> windows);
  static WindowBatch from_window(const SampleWindow& window);
};

/// Recent GCGRU (2 layers) + trend LSTM (2 layers) + external dense, fused by
/// a dense tanh layer and a graph convolution with sigmoid output.
class Generator {
 public:
  struct Cache {
    std::vector<GcgruLayer::Cache> recent1, recent2;
    std::vector<LstmLayer::Cache> trend1, trend2;
    DenseLayer::Cache external;
    DenseLayer::Cache fusion;
    Mat fused_prop;
    Mat prediction;
    bool valid = false;
  };

  explicit Generator(const ModelDims& dims = {});

  const ModelDims& dims() const { return dims_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  // (B*N) x F predictions in (0,1).
  Mat forward(const GraphOperator& g, const WindowBatch& batch, Cache* cache) const;
  // Accumulates dL/dtheta into `grads` (usually params()).
  void backward(const GraphOperator& g, const WindowBatch& batch, const Cache& cache, const Mat& d_prediction,
                ParameterStore& grads) const;

  // Single-window convenience: N x F prediction.
  Tensor generate(const GraphOperator& g, const SampleWindow& window) const;

 private:
  ModelDims dims_;
  ParameterStore params_;
  GcgruLayer recent1_, recent2_;
  LstmLayer trend1_, trend2_;
  DenseLayer external_, fusion_;
  std::size_t theta_out_ = 0, b_out_ = 0;
};

/// Scores a length L_r+1 sequence as real or fake.
///
/// GCGRU branch: one GCGRU layer over the whole sequence, per-node dense
/// readout, subgraph-masked mean pooling. GCN branch: graph convolution +
/// tanh on the final slice, per-node dense readout, mean pooling. The two
/// pooled vectors are concatenated into one logit; the probability is the
/// clamped sigmoid. Real and fake sequences share their first L_r slices,
/// so the recurrent prefix is computed once and reused for both heads.
class Discriminator {
 public:
  struct Prefix {
    std::vector<GcgruLayer::Cache> steps;
    Mat h;
  };
  struct HeadCache {
    Mat last;
    GcgruLayer::Cache step;
    DenseLayer::Cache gru_readout;
    Mat gcn_input_prop;
    Mat gcn;
    DenseLayer::Cache gcn_readout;
    DenseLayer::Cache fusion;
    Vec raw_prob;  // sigmoid before clamping
    bool valid = false;
  };

  explicit Discriminator(const ModelDims& dims = {});

  const ModelDims& dims() const { return dims_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  Prefix forward_prefix(const GraphOperator& g, std::span<const Mat> slices, bool keep_cache) const;
  // Probabilities (length B) for the sequence prefix + `last`.
  Vec forward_head(const GraphOperator& g, const Prefix& prefix, const Mat& last, HeadCache* cache) const;

  // Back-propagates dL/dprob. Adds dL/dh_prefix into `d_prefix_h` (when
  // non-null), returns dL/dlast, and accumulates parameter gradients into
  // `grads` when non-null.
  Mat backward_head(const GraphOperator& g, const Prefix& prefix, const HeadCache& cache, const Vec& d_prob,
                    ParameterStore* grads, Mat* d_prefix_h) const;
  void backward_prefix(const GraphOperator& g, const Prefix& prefix, const Mat& d_h, ParameterStore& grads) const;

  // Full forward over L_r + 1 slices of (B*N) x F. Throws DimensionError on a wrong length.
  Vec discriminate(const GraphOperator& g, std::span<const Mat> sequence) const;
  // Single-sequence convenience on a (L_r+1) x N x F tensor.
  double discriminate(const GraphOperator& g, const Tensor& sequence) const;

 private:
  ModelDims dims_;
  ParameterStore params_;
  GcgruLayer gru_;
  DenseLayer gru_readout_;
  std::size_t gcn_theta_ = 0, gcn_b_ = 0;
  DenseLayer gcn_readout_;
  DenseLayer fusion_;
};

// Tensor (L x N x F) -> L slices of N x F matrices.
std::vector<Mat> sequence_slices(const Tensor& sequence);

}  // namespace stgan
