#pragma once

#include <random>
#include <vector>

#include "stgan/graph.hpp"
#include "stgan/layers.hpp"
#include "stgan/model.hpp"
#include "stgan/preprocess.hpp"
#include "stgan/timestamp.hpp"
#include "stgan/trainer.hpp"

namespace stgan::toy {

// Four stations a few hundred metres apart; 0-1-2 chained, 3 isolated beyond
// the threshold from 0 and 1.
inline TrafficGraph toy_graph(std::size_t n = 4) {
  std::vector<Station> s;
  for (std::size_t i = 0; i < n; ++i) {
    s.push_back({std::to_string(i + 1), 57.70 + 0.003 * static_cast<double>(i),
                 11.97 + 0.002 * static_cast<double>(i * i % 5)});
  }
  return TrafficGraph::build(s, 700.0);
}

inline SampleWindow random_window(std::mt19937_64& rng, std::size_t nodes, std::size_t recent, std::size_t trend) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  SampleWindow w;
  w.recent = Tensor({recent, nodes, 1});
  w.trend = Tensor({trend, nodes, 1});
  w.target = Tensor({nodes, 1});
  for (double& v : w.recent.data()) v = u(rng);
  for (double& v : w.trend.data()) v = u(rng);
  for (double& v : w.target.data()) v = u(rng);
  w.external.fill(0.0);
  w.external[rng() % 7] = 1.0;
  w.external[7 + rng() % 24] = 1.0;
  return w;
}

inline std::vector<SampleWindow> random_windows(std::uint64_t seed, std::size_t count, std::size_t nodes,
                                                std::size_t recent, std::size_t trend) {
  std::mt19937_64 rng(seed);
  std::vector<SampleWindow> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_window(rng, nodes, recent, trend));
  return out;
}

inline std::vector<const SampleWindow*> pointers(const std::vector<SampleWindow>& w) {
  std::vector<const SampleWindow*> p;
  for (const auto& x : w) p.push_back(&x);
  return p;
}

// Seeded 4-node instance with L_r = L_d = 2 and D = 8 for gradient checks.
struct GradientCase {
  ModelDims dims{8, 1, 2, 2, kTimeFeatureSize};
  GraphOperator g = GraphOperator::from_graph(toy_graph());
  Generator gen{dims};
  Discriminator disc{dims};
  std::vector<SampleWindow> windows = random_windows(11, 3, 4, 2, 2);
  std::vector<const SampleWindow*> ptrs = pointers(windows);
  WindowBatch batch = WindowBatch::from_windows(ptrs);

  GradientCase() {
    init_parameters(gen.params(), 1);
    init_parameters(disc.params(), 2);
    // Non-zero biases so every bias path is exercised.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (auto* store : {&gen.params(), &disc.params()}) {
      for (std::size_t i = 0; i < store->size(); ++i) {
        const auto& name = store->entry(i).name;
        if (name[name.rfind('/') + 1] == 'b') {
          for (double& v : store->value(i).data()) v = u(rng);
        }
      }
    }
  }
};

// Every parameter scalar uniform in [-scale, scale].
inline void randomize(ParameterStore& p, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (double& v : p.value(i).data()) v = u(rng);
  }
}

// Recent slices followed by the target: the discriminator's real sequence.
inline Tensor sequence_of(const SampleWindow& w) {
  const std::size_t l = w.recent.dim(0), n = w.recent.dim(1);
  Tensor s({l + 1, n, 1});
  for (std::size_t k = 0; k < l; ++k) {
    for (std::size_t i = 0; i < n; ++i) s.at(k, i, 0) = w.recent.at(k, i, 0);
  }
  for (std::size_t i = 0; i < n; ++i) s.at(l, i, 0) = w.target.at(i, 0);
  return s;
}

inline Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Processed series on the 04:55-21:00 grid for `days` consecutive days.
inline FlowSeries service_series(const std::string& id, Timestamp first_day, std::size_t days, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FlowSeries s{id, {}};
  for (std::size_t d = 0; d < days; ++d) {
    const Timestamp day0 = first_day + static_cast<std::int64_t>(d) * kMinutesPerDay;
    for (int m = 4 * 60 + 55; m <= 21 * 60; m += 5) s.points.push_back({day0 + m, u(rng)});
  }
  return s;
}

inline PreparedDataset service_dataset(const TrafficGraph& g, std::size_t days, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<FlowSeries> series;
  for (const auto& st : g.stations()) series.push_back(service_series(st.id, Timestamp::from_civil(2023, 1, 2, 0, 0), days, rng));
  return assemble_dataset(series, g);
}

}  // namespace stgan::toy
