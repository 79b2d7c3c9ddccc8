#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "stgan/preprocess.hpp"
#include "stgan/timestamp.hpp"

// Straight-line references for the preprocessing stages.
namespace stgan::oracle {

inline const Timestamp kMonday = Timestamp::from_civil(2023, 1, 2, 0, 0);

// Random minute series: dropped timestamps, empty flows and a random start clock.
inline FlowSeries random_raw(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::int64_t start = static_cast<std::int64_t>(rng() % (3 * kMinutesPerDay));
  const std::size_t len = 1 + rng() % 400;
  FlowSeries s{"cam", {}};
  for (std::size_t i = 0; i < len; ++i) {
    const double r = u(rng);
    if (r < 0.1 && i > 0 && i + 1 < len) continue;
    s.points.push_back({kMonday + start + static_cast<std::int64_t>(i), r < 0.3 ? std::nullopt : std::optional(u(rng))});
  }
  if (std::none_of(s.points.begin(), s.points.end(), [](const FlowPoint& p) { return p.flow.has_value(); })) {
    s.points.back().flow = 0.5;
  }
  return s;
}

inline FlowSeries naive_forward_fill(const FlowSeries& s) {
  FlowSeries out{s.camera_id, {}};
  double first = 0.0;
  for (const auto& p : s.points) {
    if (p.flow) {
      first = *p.flow;
      break;
    }
  }
  for (std::int64_t m = s.points.front().time.minutes; m <= s.points.back().time.minutes; ++m) {
    std::optional<double> last;
    for (const auto& p : s.points) {
      if (p.time.minutes <= m && p.flow) last = p.flow;
    }
    out.points.push_back({Timestamp{m}, last ? *last : first});
  }
  return out;
}

inline FlowSeries naive_downsample(const FlowSeries& s) {
  std::map<std::int64_t, std::vector<double>> bins;
  for (const auto& p : s.points) {
    std::int64_t m = p.time.minutes;
    bins[m - ((m % 5) + 5) % 5].push_back(*p.flow);
  }
  FlowSeries out{s.camera_id, {}};
  for (const auto& [start, vals] : bins) {
    double sum = 0.0;
    for (double v : vals) sum += v;
    out.points.push_back({Timestamp{start}, sum / static_cast<double>(vals.size())});
  }
  return out;
}

inline FlowSeries naive_truncate(const FlowSeries& s, int lo, int hi) {
  FlowSeries out{s.camera_id, {}};
  for (const auto& p : s.points) {
    if (p.time.minute_of_day() >= lo && p.time.minute_of_day() <= hi) out.points.push_back(p);
  }
  return out;
}

inline void expect_same(const FlowSeries& a, const FlowSeries& b) {
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].time, b.points[i].time);
    EXPECT_EQ(a.points[i].flow, b.points[i].flow);
  }
}

}  // namespace stgan::oracle
