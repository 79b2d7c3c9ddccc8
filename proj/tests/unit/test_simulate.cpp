#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "stgan/errors.hpp"
#include "stgan/simulate.hpp"
#include "stgan/truth.hpp"

using namespace stgan;

namespace {

SimSpec small_spec(std::uint64_t seed) {
  SimSpec s;
  s.n_cameras = 8;
  s.n_days = 4;
  s.seed = seed;
  return s;
}

SimSpec quiet_spec() {
  SimSpec s = small_spec(5);
  s.noise_std = 0.0;
  s.day_variation = 0.0;
  s.missing_rate = 0.0;
  s.anomaly_rate = 0.0;
  return s;
}

const FlowPoint& at(const FlowSeries& s, Timestamp t) {
  auto it = std::lower_bound(s.points.begin(), s.points.end(), t,
                             [](const FlowPoint& p, Timestamp x) { return p.time < x; });
  return *it;
}

Timestamp day_clock(const SimSpec& spec, std::size_t day, int minute) {
  return Timestamp::parse(spec.start_date + "T00:00") + static_cast<std::int64_t>(day) * kMinutesPerDay + minute;
}

}  // namespace

TEST(Simulate, SameSeedSameOutput) {
  const auto a = simulate(small_spec(11));
  const auto b = simulate(small_spec(11));
  ASSERT_EQ(a.flows.series.size(), b.flows.series.size());
  for (std::size_t c = 0; c < a.flows.series.size(); ++c) {
    ASSERT_EQ(a.flows.series[c].points.size(), b.flows.series[c].points.size());
    for (std::size_t i = 0; i < a.flows.series[c].points.size(); ++i) {
      EXPECT_EQ(a.flows.series[c].points[i].flow, b.flows.series[c].points[i].flow);
    }
  }
  ASSERT_EQ(a.truth.size(), b.truth.size());
  for (std::size_t i = 0; i < a.truth.size(); ++i) {
    EXPECT_EQ(a.truth[i].camera_id, b.truth[i].camera_id);
    EXPECT_EQ(a.truth[i].start, b.truth[i].start);
  }
  const auto c = simulate(small_spec(12));
  EXPECT_NE(a.flows.stations[0].latitude, c.flows.stations[0].latitude);
}

TEST(Simulate, ShapeRangeAndHours) {
  const auto spec = small_spec(13);
  const auto r = simulate(spec);
  EXPECT_EQ(r.flows.stations.size(), 8u);
  for (const auto& s : r.flows.series) {
    EXPECT_EQ(s.points.size(), 4u * (21 * 60 + 9 - (4 * 60 + 53) + 1));
    EXPECT_EQ(s.points.front().time.minute_of_day(), 4 * 60 + 53);
    EXPECT_EQ(s.points.back().time.minute_of_day(), 21 * 60 + 9);
    EXPECT_NO_THROW(s.validate());
    for (const auto& p : s.points) {
      if (p.flow) {
        EXPECT_GE(*p.flow, 0.0);
        EXPECT_LE(*p.flow, 1.0);
      }
    }
  }
  for (const auto& st : r.flows.stations) {
    EXPECT_GE(st.latitude, spec.lat_min);
    EXPECT_LE(st.latitude, spec.lat_max);
  }
}

TEST(Simulate, NoiselessWeekdaysRepeat) {
  SimSpec spec = quiet_spec();
  spec.n_days = 9;  // Monday .. Tuesday of the following week
  const auto f = simulate_flows(spec);
  for (const auto& s : f.series) {
    for (int m = 4 * 60 + 53; m <= 21 * 60; m += 7) {
      const double monday = *at(s, day_clock(spec, 0, m)).flow;
      for (std::size_t d : {1u, 2u, 3u, 4u, 7u, 8u}) EXPECT_EQ(*at(s, day_clock(spec, d, m)).flow, monday);
    }
    // Weekend rush is damped relative to the weekday.
    EXPECT_LT(*at(s, day_clock(spec, 5, 8 * 60)).flow, *at(s, day_clock(spec, 0, 8 * 60)).flow);
  }
}

TEST(Simulate, MeanFlowInBand) {
  // Camera scales are uniform around 1, so the mean follows the scale-1 profile.
  SimSpec spec;
  spec.n_days = 14;
  spec.seed = 14;
  const auto f = simulate_flows(spec);
  double sum = 0.0, clean = 0.0;
  std::size_t count = 0, clean_count = 0;
  for (const auto& s : f.series) {
    for (const auto& p : s.points) {
      if (p.flow) {
        sum += *p.flow;
        ++count;
      }
    }
  }
  for (int wd = 0; wd < 7; ++wd) {
    for (int m = spec.day_start; m <= spec.day_end; ++m) {
      clean += clean_profile(spec, m, wd, 1.0, 0.0);
      ++clean_count;
    }
  }
  const double mean = sum / static_cast<double>(count), expected = clean / static_cast<double>(clean_count);
  EXPECT_NEAR(mean, expected, 0.03) << "expected " << expected;
}

TEST(Plan, BudgetWindowAndSeparation) {
  SimSpec spec;
  spec.seed = 15;
  const auto r = simulate(spec);
  const Timestamp first = day_clock(spec, 0, 0);
  std::map<AnomalyKind, std::vector<std::size_t>> per_day;  // tagged slots per kind and day
  for (auto kind : {AnomalyKind::SignalCut, AnomalyKind::Weather, AnomalyKind::VisualArtifact}) {
    per_day[kind].assign(spec.n_days, 0);
  }
  for (const auto& rec : r.truth) {
    EXPECT_EQ((rec.end.minutes - rec.start.minutes) % 5, 0);
    EXPECT_EQ(rec.start.minutes % 5, 0);
    EXPECT_GE(rec.start.minute_of_day(), 7 * 60);
    EXPECT_LE(rec.end.minute_of_day(), 19 * 60);
    const auto day = static_cast<std::size_t>((rec.start.minutes - first.minutes) / kMinutesPerDay);
    per_day[rec.kind][day] += static_cast<std::size_t>((rec.end.minutes - rec.start.minutes) / 5);
  }
  const double total = 42.0 * 30.0 * 194.0;
  const std::pair<AnomalyKind, double> shares[] = {{AnomalyKind::SignalCut, spec.signal_cut_share},
                                                   {AnomalyKind::Weather, spec.weather_share},
                                                   {AnomalyKind::VisualArtifact, spec.visual_artifact_share}};
  for (const auto& [kind, share] : shares) {
    const double budget = std::round(spec.anomaly_rate * share * total);
    const std::size_t largest = kind == AnomalyKind::Weather ? 5 * spec.n_cameras : 4;
    // Every day prefix holds its share of the budget, overshooting by at most one event.
    std::size_t cumulative = 0;
    for (std::size_t d = 0; d < spec.n_days; ++d) {
      cumulative += per_day[kind][d];
      const double target = budget * static_cast<double>(d + 1) / static_cast<double>(spec.n_days);
      EXPECT_GE(static_cast<double>(cumulative), std::floor(target)) << kind_name(kind) << " day " << d;
      EXPECT_LT(static_cast<double>(cumulative), std::ceil(target) + static_cast<double>(largest))
          << kind_name(kind) << " day " << d;
    }
  }
  for (std::size_t i = 0; i < r.truth.size(); ++i) {
    for (std::size_t j = i + 1; j < r.truth.size(); ++j) {
      const auto& a = r.truth[i];
      const auto& b = r.truth[j];
      if (a.camera_id != b.camera_id) continue;
      const bool same_event = a.start == b.start && a.kind == b.kind;
      if (!same_event) {
        EXPECT_GE(std::abs(a.start.minutes - b.start.minutes), 60);
      }
    }
  }
}

TEST(Inject, NoEventsLeaveSeriesUnchanged) {
  const auto spec = quiet_spec();
  auto f = simulate_flows(spec);
  const auto before = f.series;
  const auto graph = TrafficGraph::build(f.stations, spec.threshold);
  EXPECT_TRUE(inject_anomalies(f.series, graph, {}, 1).empty());
  for (std::size_t c = 0; c < before.size(); ++c) {
    for (std::size_t i = 0; i < before[c].points.size(); ++i) EXPECT_EQ(f.series[c].points[i].flow, before[c].points[i].flow);
  }
}

TEST(Inject, SignalCutBlanksThenGoesMissing) {
  const auto spec = quiet_spec();
  auto f = simulate_flows(spec);
  const auto graph = TrafficGraph::build(f.stations, spec.threshold);
  const Timestamp start = day_clock(spec, 1, 10 * 60);
  const auto records = inject_anomalies(f.series, graph, {{AnomalyKind::SignalCut, "3", start, 15, 0.0}}, 1);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].start, start);
  EXPECT_EQ(records[0].end, start + 15);
  const auto& s = f.series[2];
  EXPECT_EQ(at(s, start).flow, 0.0);
  for (int m = 1; m < 15; ++m) EXPECT_FALSE(at(s, start + m).flow.has_value());
  EXPECT_TRUE(at(s, start + 15).flow.has_value());
  EXPECT_TRUE(at(s, start + (-1)).flow.has_value());
}

TEST(Inject, WeatherHitsExactlyTheNeighbourhood) {
  const auto spec = quiet_spec();
  auto f = simulate_flows(spec);
  const auto clean = f.series;
  const auto graph = TrafficGraph::build(f.stations, spec.threshold);
  for (std::size_t center = 0; center < graph.size(); ++center) {
    auto series = clean;
    const Timestamp start = day_clock(spec, 2, 9 * 60);
    const auto records = inject_anomalies(series, graph, {{AnomalyKind::Weather, graph.stations()[center].id, start, 15, 0.7}}, 1);
    std::set<std::size_t> expected;
    for (std::size_t v = 0; v < graph.size(); ++v) {
      if (v == center || graph.weights().at(center, v) > 0.0) expected.insert(v);
    }
    std::set<std::size_t> changed, tagged;
    for (const auto& r : records) {
      tagged.insert(graph.index_of(r.camera_id));
      EXPECT_EQ(r.end, start + 25);
    }
    for (std::size_t v = 0; v < graph.size(); ++v) {
      for (std::size_t i = 0; i < series[v].points.size(); ++i) {
        if (series[v].points[i].flow != clean[v].points[i].flow) changed.insert(v);
      }
    }
    EXPECT_EQ(changed, expected);
    EXPECT_EQ(tagged, expected);
    // Effect size: on the plateau every affected camera drops by at least half the depth.
    for (std::size_t v : expected) {
      for (int m = 3; m < 12; ++m) {
        const double before = *at(clean[v], start + m).flow, after = *at(series[v], start + m).flow;
        EXPECT_LE(after, before * (1.0 - 0.5 * 0.7) + 1e-12);
      }
      // Recovery eases off monotonically and ends with the truth interval.
      for (int m = 15; m < 24; ++m) {
        const double gap = *at(clean[v], start + m).flow - *at(series[v], start + m).flow;
        const double next = *at(clean[v], start + m + 1).flow - *at(series[v], start + m + 1).flow;
        EXPECT_GE(gap / *at(clean[v], start + m).flow, next / *at(clean[v], start + m + 1).flow - 1e-12);
      }
      EXPECT_EQ(at(series[v], start + 25).flow, at(clean[v], start + 25).flow);
    }
  }
}

TEST(Inject, ArtifactSpikesCarryTheSign) {
  const auto spec = quiet_spec();
  auto f = simulate_flows(spec);
  const auto clean = f.series;
  const auto graph = TrafficGraph::build(f.stations, spec.threshold);
  const Timestamp start = day_clock(spec, 1, 12 * 60);
  inject_anomalies(f.series, graph, {{AnomalyKind::VisualArtifact, "1", start, 10, 0.3}}, 1);
  for (int m = 0; m < 10; ++m) {
    const double d = *at(f.series[0], start + m).flow - *at(clean[0], start + m).flow;
    EXPECT_GE(d, std::min(0.15, 1.0 - *at(clean[0], start + m).flow) - 1e-12);
  }
  for (std::size_t c = 1; c < clean.size(); ++c) {
    EXPECT_EQ(at(f.series[c], start).flow, at(clean[c], start).flow);
  }
}

TEST(Inject, OverlapsAreRejected) {
  const auto spec = quiet_spec();
  auto f = simulate_flows(spec);
  const auto graph = TrafficGraph::build(f.stations, spec.threshold);
  const Timestamp start = day_clock(spec, 1, 10 * 60);
  const auto before = f.series;
  EXPECT_THROW(inject_anomalies(f.series, graph,
                                {{AnomalyKind::SignalCut, "2", start, 10, 0.0},
                                 {AnomalyKind::VisualArtifact, "2", start + 8, 5, 0.3}},
                                1),
               ConflictError);
  // A weather event claims its whole neighbourhood.
  std::size_t neighbour = graph.size();
  for (std::size_t v = 1; v < graph.size() && neighbour == graph.size(); ++v) {
    if (graph.weights().at(0, v) > 0.0) neighbour = v;
  }
  if (neighbour < graph.size()) {
    EXPECT_THROW(inject_anomalies(f.series, graph,
                                  {{AnomalyKind::Weather, "1", start, 15, 0.7},
                                   {AnomalyKind::SignalCut, graph.stations()[neighbour].id, start + 5, 10, 0.0}},
                                  1),
                 ConflictError);
  }
  // Rejection happens before any value is touched.
  for (std::size_t c = 0; c < before.size(); ++c) {
    for (std::size_t i = 0; i < before[c].points.size(); ++i) EXPECT_EQ(f.series[c].points[i].flow, before[c].points[i].flow);
  }
  EXPECT_THROW(inject_anomalies(f.series, graph, {{AnomalyKind::SignalCut, "2", start + 30 * kMinutesPerDay, 10, 0.0}}, 1),
               DataError);
}

TEST(SimSpec, Validation) {
  SimSpec s;
  EXPECT_NO_THROW(s.validate());
  s.n_cameras = 1;
  EXPECT_THROW(s.validate(), ConfigError);
  s = SimSpec{};
  s.anomaly_rate = 1.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = SimSpec{};
  s.evening_amp = 1.2;
  EXPECT_THROW(s.validate(), ConfigError);
}
