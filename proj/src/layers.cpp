#include "stgan/layers.hpp"

#include <cmath>
#include <random>

#include "stgan/errors.hpp"

namespace stgan {

GraphOperator GraphOperator::from_graph(const TrafficGraph& graph) {
  GraphOperator g;
  g.propagation = graph.propagation().matrix();
  const std::size_t n = graph.size();
  // Mean over each node's subgraph, then mean over nodes, collapses to one
  // weight per node.
  g.pool_weights = Vec::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t v = 0; v < n; ++v) {
    const auto sg = node_subgraph(graph, v);
    const double w = 1.0 / (static_cast<double>(n) * static_cast<double>(sg.members.size()));
    for (std::size_t u : sg.members) g.pool_weights(static_cast<Eigen::Index>(u)) += w;
  }
  return g;
}

GraphOperator GraphOperator::from_propagation(const Tensor& propagation) {
  GraphOperator g;
  g.propagation = propagation.matrix();
  const auto n = g.propagation.rows();
  g.pool_weights = Vec::Constant(n, 1.0 / static_cast<double>(n));
  return g;
}

Mat GraphOperator::propagate(const Mat& x) const {
  const auto n = propagation.rows();
  if (x.rows() % n != 0) throw DimensionError("propagate: rows not a multiple of the node count");
  Mat out(x.rows(), x.cols());
  for (Eigen::Index b = 0; b < x.rows() / n; ++b) {
    out.middleRows(b * n, n).noalias() = propagation * x.middleRows(b * n, n);
  }
  return out;
}

Mat GraphOperator::propagate_transposed(const Mat& x) const {
  const auto n = propagation.rows();
  if (x.rows() % n != 0) throw DimensionError("propagate: rows not a multiple of the node count");
  Mat out(x.rows(), x.cols());
  for (Eigen::Index b = 0; b < x.rows() / n; ++b) {
    out.middleRows(b * n, n).noalias() = propagation.transpose() * x.middleRows(b * n, n);
  }
  return out;
}

Mat broadcast_rows(const Mat& row, std::size_t nodes) {
  const auto n = static_cast<Eigen::Index>(nodes);
  Mat out(row.rows() * n, row.cols());
  for (Eigen::Index b = 0; b < row.rows(); ++b) out.middleRows(b * n, n).rowwise() = row.row(b);
  return out;
}

Mat sum_node_blocks(const Mat& x, std::size_t nodes) {
  const auto n = static_cast<Eigen::Index>(nodes);
  Mat out(x.rows() / n, x.cols());
  for (Eigen::Index b = 0; b < out.rows(); ++b) out.row(b) = x.middleRows(b * n, n).colwise().sum();
  return out;
}

namespace {

void add_bias(Mat& m, const ParameterStore& p, std::size_t b) { m.rowwise() += p.value(b).matrix().row(0); }

void accumulate_bias(ParameterStore& grads, std::size_t b, const Mat& d) {
  grads.grad(b).matrix().row(0) += d.colwise().sum();
}

void accumulate_weight(ParameterStore& grads, std::size_t w, const Mat& in, const Mat& d) {
  grads.grad(w).matrix().noalias() += in.transpose() * d;
}

Mat sigmoid_grad(const Mat& y) { return (y.array() * (1.0 - y.array())).matrix(); }
Mat tanh_grad(const Mat& y) { return (1.0 - y.array().square()).matrix(); }

}  // namespace

DenseLayer::DenseLayer(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                       DenseActivation act)
    : w_(store.add(prefix + "/W", {in, out})), b_(store.add(prefix + "/b", {1, out})), act_(act) {}

Mat DenseLayer::forward(const Mat& x, const ParameterStore& p, Cache* cache) const {
  Mat y = x * p.value(w_).matrix();
  add_bias(y, p, b_);
  if (act_ == DenseActivation::Tanh) y = tanh(y);
  if (cache) {
    cache->x = x;
    cache->y = y;
  }
  return y;
}

Mat DenseLayer::backward(const Cache& cache, const Mat& d_y, const ParameterStore& p, ParameterStore* grads) const {
  Mat d_pre = act_ == DenseActivation::Tanh ? Mat(d_y.cwiseProduct(tanh_grad(cache.y))) : d_y;
  if (grads) {
    accumulate_weight(*grads, w_, cache.x, d_pre);
    accumulate_bias(*grads, b_, d_pre);
  }
  return d_pre * p.value(w_).matrix().transpose();
}

GcgruLayer::GcgruLayer(ParameterStore& store, const std::string& prefix, std::size_t input, std::size_t hidden)
    : input_(input), hidden_(hidden) {
  w_r_ = store.add(prefix + "/W_r", {input, hidden});
  u_r_ = store.add(prefix + "/U_r", {hidden, hidden});
  b_r_ = store.add(prefix + "/b_r", {1, hidden});
  w_z_ = store.add(prefix + "/W_z", {input, hidden});
  u_z_ = store.add(prefix + "/U_z", {hidden, hidden});
  b_z_ = store.add(prefix + "/b_z", {1, hidden});
  w_h_ = store.add(prefix + "/W_h", {input, hidden});
  u_h_ = store.add(prefix + "/U_h", {hidden, hidden});
  b_h_ = store.add(prefix + "/b_h", {1, hidden});
}

Mat GcgruLayer::forward(const GraphOperator& g, const Mat& x, const Mat& h_prev, const ParameterStore& p,
                        Cache* cache) const {
  if (x.cols() != static_cast<Eigen::Index>(input_) || h_prev.cols() != static_cast<Eigen::Index>(hidden_) ||
      x.rows() != h_prev.rows()) {
    throw DimensionError("gcgru: input " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + ", state " +
                         std::to_string(h_prev.rows()) + "x" + std::to_string(h_prev.cols()) + " do not fit layer " +
                         std::to_string(input_) + "->" + std::to_string(hidden_));
  }
  Mat x_prop = g.propagate(x);
  Mat h_prop = g.propagate(h_prev);

  Mat pre_r = x_prop * p.value(w_r_).matrix();
  pre_r.noalias() += h_prop * p.value(u_r_).matrix();
  add_bias(pre_r, p, b_r_);
  Mat r = sigmoid(pre_r);

  Mat pre_z = x_prop * p.value(w_z_).matrix();
  pre_z.noalias() += h_prop * p.value(u_z_).matrix();
  add_bias(pre_z, p, b_z_);
  Mat z = sigmoid(pre_z);

  Mat rh_prop = g.propagate(r.cwiseProduct(h_prev));
  Mat pre_h = x_prop * p.value(w_h_).matrix();
  pre_h.noalias() += rh_prop * p.value(u_h_).matrix();
  add_bias(pre_h, p, b_h_);
  Mat candidate = tanh(pre_h);

  Mat h = (z.array() * h_prev.array() + (1.0 - z.array()) * candidate.array()).matrix();
  if (cache) {
    cache->x_prop = std::move(x_prop);
    cache->h_prev = h_prev;
    cache->h_prop = std::move(h_prop);
    cache->r = std::move(r);
    cache->z = std::move(z);
    cache->rh_prop = std::move(rh_prop);
    cache->candidate = std::move(candidate);
  }
  return h;
}

void GcgruLayer::backward(const GraphOperator& g, const Cache& c, const Mat& d_h, const ParameterStore& p,
                          ParameterStore* grads, Mat* d_x, Mat& d_h_prev) const {
  const Mat d_z = (d_h.array() * (c.h_prev.array() - c.candidate.array())).matrix();
  const Mat d_pre_h = (d_h.array() * (1.0 - c.z.array()) * (1.0 - c.candidate.array().square())).matrix();
  d_h_prev = d_h.cwiseProduct(c.z);

  const Mat d_rh = g.propagate_transposed(d_pre_h * p.value(u_h_).matrix().transpose());
  const Mat d_r = d_rh.cwiseProduct(c.h_prev);
  d_h_prev += d_rh.cwiseProduct(c.r);

  const Mat d_pre_z = d_z.cwiseProduct(sigmoid_grad(c.z));
  const Mat d_pre_r = d_r.cwiseProduct(sigmoid_grad(c.r));

  if (grads) {
    accumulate_weight(*grads, w_h_, c.x_prop, d_pre_h);
    accumulate_weight(*grads, u_h_, c.rh_prop, d_pre_h);
    accumulate_bias(*grads, b_h_, d_pre_h);
    accumulate_weight(*grads, w_z_, c.x_prop, d_pre_z);
    accumulate_weight(*grads, u_z_, c.h_prop, d_pre_z);
    accumulate_bias(*grads, b_z_, d_pre_z);
    accumulate_weight(*grads, w_r_, c.x_prop, d_pre_r);
    accumulate_weight(*grads, u_r_, c.h_prop, d_pre_r);
    accumulate_bias(*grads, b_r_, d_pre_r);
  }

  Mat d_h_prop = d_pre_r * p.value(u_r_).matrix().transpose();
  d_h_prop.noalias() += d_pre_z * p.value(u_z_).matrix().transpose();
  d_h_prev += g.propagate_transposed(d_h_prop);

  if (d_x) {
    Mat d_x_prop = d_pre_r * p.value(w_r_).matrix().transpose();
    d_x_prop.noalias() += d_pre_z * p.value(w_z_).matrix().transpose();
    d_x_prop.noalias() += d_pre_h * p.value(w_h_).matrix().transpose();
    *d_x = g.propagate_transposed(d_x_prop);
  }
}

LstmLayer::LstmLayer(ParameterStore& store, const std::string& prefix, std::size_t input, std::size_t hidden)
    : input_(input), hidden_(hidden) {
  w_ = store.add(prefix + "/W", {input, 4 * hidden});
  u_ = store.add(prefix + "/U", {hidden, 4 * hidden});
  b_ = store.add(prefix + "/b", {1, 4 * hidden});
}

LstmLayer::State LstmLayer::forward(const Mat& x, const State& prev, const ParameterStore& p, Cache* cache) const {
  if (x.cols() != static_cast<Eigen::Index>(input_) || prev.h.cols() != static_cast<Eigen::Index>(hidden_) ||
      x.rows() != prev.h.rows()) {
    throw DimensionError("lstm: input/state shapes do not fit layer " + std::to_string(input_) + "->" +
                         std::to_string(hidden_));
  }
  const auto d = static_cast<Eigen::Index>(hidden_);
  Mat pre = x * p.value(w_).matrix();
  pre.noalias() += prev.h * p.value(u_).matrix();
  add_bias(pre, p, b_);

  Mat i = sigmoid(Mat(pre.middleCols(0, d)));
  Mat f = sigmoid(Mat(pre.middleCols(d, d)));
  Mat g = tanh(Mat(pre.middleCols(2 * d, d)));
  Mat o = sigmoid(Mat(pre.middleCols(3 * d, d)));

  State next;
  next.c = (f.array() * prev.c.array() + i.array() * g.array()).matrix();
  Mat tanh_c = tanh(next.c);
  next.h = o.cwiseProduct(tanh_c);
  if (cache) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->g = std::move(g);
    cache->o = std::move(o);
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

void LstmLayer::backward(const Cache& c, const Mat& d_h, const Mat& d_c, const ParameterStore& p, ParameterStore* grads,
                         Mat* d_x, Mat& d_h_prev, Mat& d_c_prev) const {
  const auto d = static_cast<Eigen::Index>(hidden_);
  const Mat d_c_total = d_c + (d_h.array() * c.o.array() * (1.0 - c.tanh_c.array().square())).matrix();

  Mat d_pre(d_h.rows(), 4 * d);
  d_pre.middleCols(0, d) = (d_c_total.array() * c.g.array() * c.i.array() * (1.0 - c.i.array())).matrix();
  d_pre.middleCols(d, d) = (d_c_total.array() * c.c_prev.array() * c.f.array() * (1.0 - c.f.array())).matrix();
  d_pre.middleCols(2 * d, d) = (d_c_total.array() * c.i.array() * (1.0 - c.g.array().square())).matrix();
  d_pre.middleCols(3 * d, d) = (d_h.array() * c.tanh_c.array() * c.o.array() * (1.0 - c.o.array())).matrix();
  d_c_prev = d_c_total.cwiseProduct(c.f);

  if (grads) {
    accumulate_weight(*grads, w_, c.x, d_pre);
    accumulate_weight(*grads, u_, c.h_prev, d_pre);
    accumulate_bias(*grads, b_, d_pre);
  }
  d_h_prev = d_pre * p.value(u_).matrix().transpose();
  if (d_x) *d_x = d_pre * p.value(w_).matrix().transpose();
}

void init_parameters(ParameterStore& store, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.entry(i);
    const auto slash = e.name.rfind('/');
    const char leaf = e.name[slash == std::string::npos ? 0 : slash + 1];
    if (leaf == 'b' || e.value.rank() != 2) {
      e.value.fill(0.0);
      continue;
    }
    const double fan = static_cast<double>(e.value.dim(0) + e.value.dim(1));
    const double limit = std::sqrt(6.0 / fan);
    for (double& v : e.value.data()) {
      // 53 random bits -> [0,1); avoids library-specific distribution algorithms.
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = (2.0 * u - 1.0) * limit;
    }
  }
}

}  // namespace stgan
