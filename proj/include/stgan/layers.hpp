#pragma once

#include <string>

#include "stgan/graph.hpp"
#include "stgan/parameters.hpp"
#include "stgan/tensor.hpp"

namespace stgan {

/// Graph-side constants shared by every layer of one model instance.
///
/// Batched node matrices stack B samples of N rows each; propagation is
/// applied block by block.
struct GraphOperator {
  Mat propagation;   // N x N
  Vec pool_weights;  // length N, sums to 1 (subgraph-masked mean pooling)

  static GraphOperator from_graph(const TrafficGraph& graph);
  // Uniform pooling, for toy instances without a TrafficGraph.
  static GraphOperator from_propagation(const Tensor& propagation);

  std::size_t nodes() const { return static_cast<std::size_t>(propagation.rows()); }
  Mat propagate(const Mat& x) const;
  Mat propagate_transposed(const Mat& x) const;
};

// Rows of `row` repeated for every node of its sample: (B x D) -> (B*N x D).
Mat broadcast_rows(const Mat& row, std::size_t nodes);
// Inverse of broadcast_rows for gradients: sums each sample's N rows.
Mat sum_node_blocks(const Mat& x, std::size_t nodes);

enum class DenseActivation { Identity, Tanh };

/// x * W + b followed by an optional tanh.
class DenseLayer {
 public:
  struct Cache {
    Mat x;
    Mat y;
  };

  DenseLayer() = default;
  DenseLayer(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, DenseActivation act);

  Mat forward(const Mat& x, const ParameterStore& p, Cache* cache) const;
  // Returns dL/dx; accumulates weight gradients into `grads` when non-null.
  Mat backward(const Cache& cache, const Mat& d_y, const ParameterStore& p, ParameterStore* grads) const;

 private:
  std::size_t w_ = 0, b_ = 0;
  DenseActivation act_ = DenseActivation::Identity;
};

/// Graph-convolutional GRU cell:
///   r  = sigmoid(A X W_r + A H U_r + b_r)
///   z  = sigmoid(A X W_z + A H U_z + b_z)
///   H~ = tanh(A X W_h + A (r . H) U_h + b_h)
///   H' = z . H + (1 - z) . H~
class GcgruLayer {
 public:
  struct Cache {
    Mat x_prop;
    Mat h_prev;
    Mat h_prop;
    Mat r;
    Mat z;
    Mat rh_prop;
    Mat candidate;
  };

  GcgruLayer() = default;
  GcgruLayer(ParameterStore& store, const std::string& prefix, std::size_t input, std::size_t hidden);

  Mat forward(const GraphOperator& g, const Mat& x, const Mat& h_prev, const ParameterStore& p, Cache* cache) const;

  // Given dL/dH', writes dL/dH_prev and (when d_x is non-null) dL/dX.
  void backward(const GraphOperator& g, const Cache& c, const Mat& d_h, const ParameterStore& p, ParameterStore* grads,
                Mat* d_x, Mat& d_h_prev) const;

  std::size_t input() const { return input_; }
  std::size_t hidden() const { return hidden_; }

 private:
  std::size_t input_ = 0, hidden_ = 0;
  std::size_t w_r_ = 0, u_r_ = 0, b_r_ = 0;
  std::size_t w_z_ = 0, u_z_ = 0, b_z_ = 0;
  std::size_t w_h_ = 0, u_h_ = 0, b_h_ = 0;
};

/// Per-node LSTM cell with fused gate weights laid out [input|forget|cell|output].
class LstmLayer {
 public:
  struct State {
    Mat h;
    Mat c;
  };
  struct Cache {
    Mat x;
    Mat h_prev;
    Mat c_prev;
    Mat i, f, g, o;
    Mat tanh_c;
  };

  LstmLayer() = default;
  LstmLayer(ParameterStore& store, const std::string& prefix, std::size_t input, std::size_t hidden);

  State forward(const Mat& x, const State& prev, const ParameterStore& p, Cache* cache) const;
  void backward(const Cache& c, const Mat& d_h, const Mat& d_c, const ParameterStore& p, ParameterStore* grads, Mat* d_x,
                Mat& d_h_prev, Mat& d_c_prev) const;

  std::size_t hidden() const { return hidden_; }

 private:
  std::size_t input_ = 0, hidden_ = 0;
  std::size_t w_ = 0, u_ = 0, b_ = 0;
};

/// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))) and zero biases.
/// Parameters whose leaf name starts with 'b' are biases.
void init_parameters(ParameterStore& store, std::uint64_t seed);

}  // namespace stgan
