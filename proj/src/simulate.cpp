#include "stgan/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>

#include "stgan/errors.hpp"

namespace stgan {

namespace {

double gauss(double x, double mu, double width) {
  const double u = (x - mu) / width;
  return std::exp(-0.5 * u * u);
}

// Independent engine per purpose so adding draws to one stage leaves the others unchanged.
std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t service_slots_per_day() {
  const PipelineConfig p;
  return static_cast<std::size_t>((p.day_end - p.day_start) / 5 + 1);
}

Timestamp start_of(const SimSpec& spec, std::size_t day) {
  return Timestamp::parse(spec.start_date + "T00:00") + static_cast<std::int64_t>(day) * kMinutesPerDay;
}

// Minutes tagged in truth for an event, starting at event.start.
int tagged_minutes(const AnomalyEvent& e) {
  switch (e.kind) {
    case AnomalyKind::Weather:
      return e.duration_minutes + kRecoveryMinutes;
    case AnomalyKind::SignalCut:
    case AnomalyKind::VisualArtifact:
      break;
  }
  return e.duration_minutes;
}

struct Interval {
  Timestamp start, end;
};

bool overlaps(const Interval& a, const Interval& b) { return a.start < b.end && b.start < a.end; }

std::vector<std::size_t> affected_nodes(const AnomalyEvent& e, const TrafficGraph& graph) {
  const std::size_t c = graph.index_of(e.camera_id);
  if (e.kind == AnomalyKind::Weather) return node_subgraph(graph, c).members;
  return {c};
}

}  // namespace

void SimSpec::validate() const {
  if (n_cameras < 2) throw ConfigError("the simulator needs at least 2 cameras");
  if (n_days < 1) throw ConfigError("the simulator needs at least 1 day");
  if (!(day_start >= 0 && day_start < day_end && day_end < static_cast<int>(kMinutesPerDay))) {
    throw ConfigError("simulated hours must satisfy 00:00 <= start < end < 24:00");
  }
  if (!(lat_min < lat_max) || !(lon_min < lon_max)) throw ConfigError("empty station bounding box");
  for (double r : {missing_rate, anomaly_rate, signal_cut_share, weather_share, visual_artifact_share, weather_depth}) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("rates, shares and depths must lie in [0, 1]");
  }
  if (anomaly_rate > 0.0 && signal_cut_share + weather_share + visual_artifact_share <= 0.0) {
    throw ConfigError("at least one anomaly kind needs a positive share");
  }
  if (!(profile_length > 0.0)) throw ConfigError("profile correlation length must be positive");
  if (!(noise_std >= 0.0) || !(day_variation >= 0.0) || !(camera_spread >= 0.0 && camera_spread < 1.0)) {
    throw ConfigError("noise, day variation and camera spread must be non-negative (spread < 1)");
  }
  if (!(artifact_amplitude >= 0.0 && artifact_amplitude <= 1.0)) throw ConfigError("artifact amplitude must lie in [0, 1]");
  // Amplitudes must keep the clean profile inside [0, 1] for every camera.
  for (int wd : {0, 6}) {
    for (double shift : {-peak_jitter, 0.0, peak_jitter}) {
      for (int m = day_start; m <= day_end; ++m) {
        const double v = clean_profile(*this, m, wd, 1.0 + camera_spread, shift);
        if (v > 1.0 || v < 0.0) throw ConfigError("profile amplitudes push clean flow outside [0, 1]");
      }
    }
  }
  Timestamp::parse(start_date + "T00:00");
}

double clean_profile(const SimSpec& spec, int minute_of_day, int weekday, double camera_scale, double camera_shift) {
  const bool weekend = weekday >= 5;
  const double rush = weekend ? spec.weekend_rush_factor : 1.0;
  const double mid = weekend ? spec.weekend_midday_factor : 1.0;
  const double m = minute_of_day;
  const double bumps = rush * (spec.morning_amp * gauss(m, spec.morning_peak + camera_shift, spec.morning_width) +
                               spec.evening_amp * gauss(m, spec.evening_peak + camera_shift, spec.evening_width)) +
                       mid * spec.midday_amp * gauss(m, spec.midday_peak + camera_shift, spec.midday_width);
  return spec.base_level + camera_scale * bumps;
}

namespace {

// Lower Cholesky factor of exp(-d^2 / length2) over all station pairs.
Mat kernel_cholesky(const TrafficGraph& graph, double length2) {
  const auto n = static_cast<Eigen::Index>(graph.size());
  Mat kernel(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = graph.distances().at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      kernel(i, j) = std::exp(-d * d / length2);
    }
  }
  for (double jitter = 1e-9; jitter <= 1e-1; jitter *= 10.0) {
    Eigen::LLT<Mat> llt(kernel + jitter * Mat::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw GraphError("spatial covariance is not positive definite");
}

}  // namespace

SimulatedFlows simulate_flows(const SimSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_cameras;
  SimulatedFlows out;

  auto geo = stream(spec.seed, 1);
  for (std::size_t c = 0; c < n; ++c) {
    const double lat = spec.lat_min + (spec.lat_max - spec.lat_min) * uniform(geo);
    const double lon = spec.lon_min + (spec.lon_max - spec.lon_min) * uniform(geo);
    out.stations.push_back({std::to_string(c + 1), lat, lon});
  }
  const TrafficGraph graph = TrafficGraph::build(out.stations, spec.threshold);

  // Per-camera scale and shift: correlated Gaussian field mapped through the
  // normal CDF, so each marginal stays uniform on its configured range.
  std::vector<double> scale(n), shift(n);
  {
    const Mat field = kernel_cholesky(graph, spec.profile_length * spec.profile_length);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec a(static_cast<Eigen::Index>(n)), b(static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < n; ++c) {
      a(static_cast<Eigen::Index>(c)) = normal(geo);
      b(static_cast<Eigen::Index>(c)) = normal(geo);
    }
    const Vec za = field * a, zb = field * b;
    for (std::size_t c = 0; c < n; ++c) {
      const double ua = 0.5 * std::erfc(-za(static_cast<Eigen::Index>(c)) / std::sqrt(2.0));
      const double ub = 0.5 * std::erfc(-zb(static_cast<Eigen::Index>(c)) / std::sqrt(2.0));
      scale[c] = 1.0 + spec.camera_spread * (2.0 * ua - 1.0);
      shift[c] = spec.peak_jitter * (2.0 * ub - 1.0);
    }
  }

  // Noise covariance: the graph's Gaussian kernel over all pairs.
  const Mat chol = kernel_cholesky(graph, graph.sigma() * graph.sigma());

  auto day_rng = stream(spec.seed, 2);
  auto noise_rng = stream(spec.seed, 3);
  auto gap_rng = stream(spec.seed, 4);
  std::normal_distribution<double> normal(0.0, 1.0);

  out.series.resize(n);
  const std::size_t per_day = static_cast<std::size_t>(spec.day_end - spec.day_start + 1);
  for (std::size_t c = 0; c < n; ++c) {
    out.series[c].camera_id = out.stations[c].id;
    out.series[c].points.reserve(per_day * spec.n_days);
  }
  Vec z(static_cast<Eigen::Index>(n));
  for (std::size_t d = 0; d < spec.n_days; ++d) {
    const Timestamp midnight = start_of(spec, d);
    const int wd = midnight.weekday();
    const double level = 1.0 + spec.day_variation * normal(day_rng);
    for (int m = spec.day_start; m <= spec.day_end; ++m) {
      for (Eigen::Index c = 0; c < z.size(); ++c) z(c) = normal(noise_rng);
      const Vec e = spec.noise_std * (chol * z);
      for (std::size_t c = 0; c < n; ++c) {
        const double clean = clean_profile(spec, m, wd, scale[c], shift[c]);
        FlowPoint p{midnight + m, std::clamp(level * clean + e(static_cast<Eigen::Index>(c)), 0.0, 1.0)};
        if (uniform(gap_rng) < spec.missing_rate) p.flow.reset();
        out.series[c].points.push_back(p);
      }
    }
  }
  return out;
}

std::vector<AnomalyEvent> plan_anomalies(const SimSpec& spec, const TrafficGraph& graph) {
  spec.validate();
  const std::size_t total = spec.n_cameras * spec.n_days * service_slots_per_day();
  const double shares = spec.signal_cut_share + spec.weather_share + spec.visual_artifact_share;
  std::vector<AnomalyEvent> events;
  if (spec.anomaly_rate <= 0.0 || shares <= 0.0) return events;

  auto rng = stream(spec.seed, 5);
  constexpr int kEarliest = 7 * 60;
  constexpr int kLatest = 19 * 60;
  constexpr int kSeparation = 60;
  constexpr int kAttemptsPerDay = 500;
  std::map<std::size_t, std::vector<Interval>> busy;  // padded intervals per node

  // Weather first: its neighbourhoods are the hardest to fit around other events.
  const std::pair<AnomalyKind, double> kinds[] = {{AnomalyKind::Weather, spec.weather_share},
                                                  {AnomalyKind::SignalCut, spec.signal_cut_share},
                                                  {AnomalyKind::VisualArtifact, spec.visual_artifact_share}};
  for (const auto& [kind, share] : kinds) {
    const auto budget = static_cast<std::size_t>(std::llround(spec.anomaly_rate * share / shares * static_cast<double>(total)));
    std::size_t tagged = 0, day = 0;
    int failures = 0;
    while (tagged < budget) {
      // Days fill in order, so any run of consecutive days carries its share of the budget.
      while (day < spec.n_days && tagged * spec.n_days >= budget * (day + 1)) {
        ++day;
        failures = 0;
      }
      if (failures >= kAttemptsPerDay) {
        ++day;
        failures = 0;
      }
      if (day >= spec.n_days) break;

      AnomalyEvent e;
      e.kind = kind;
      const std::size_t center = rng() % graph.size();
      e.camera_id = graph.stations()[center].id;
      switch (e.kind) {
        case AnomalyKind::SignalCut:
          e.duration_minutes = (rng() % 2 == 0) ? 10 : 15;
          break;
        case AnomalyKind::Weather:
          e.duration_minutes = 15;
          e.magnitude = spec.weather_depth;
          break;
        case AnomalyKind::VisualArtifact:
          e.duration_minutes = (rng() % 2 == 0) ? 5 : 10;
          e.magnitude = (rng() % 2 == 0 ? 1.0 : -1.0) * spec.artifact_amplitude;
          break;
      }
      const int span = tagged_minutes(e);
      const int slots = (kLatest - span - kEarliest) / 5 + 1;
      e.start = start_of(spec, day) + kEarliest + 5 * static_cast<int>(rng() % static_cast<std::uint64_t>(slots));

      const Interval padded{e.start + (-kSeparation), e.start + (span + kSeparation)};
      const auto nodes = affected_nodes(e, graph);
      bool clash = false;
      for (std::size_t v : nodes) {
        for (const auto& iv : busy[v]) clash = clash || overlaps(iv, padded);
      }
      if (clash) {
        ++failures;
        continue;
      }
      for (std::size_t v : nodes) busy[v].push_back(padded);
      tagged += nodes.size() * static_cast<std::size_t>(span / 5);
      events.push_back(std::move(e));
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const AnomalyEvent& a, const AnomalyEvent& b) {
    return a.start < b.start;
  });
  return events;
}

std::vector<InjectionRecord> inject_anomalies(std::vector<FlowSeries>& series, const TrafficGraph& graph,
                                              const std::vector<AnomalyEvent>& events, std::uint64_t seed) {
  std::map<std::string, std::size_t> series_of;
  for (std::size_t i = 0; i < series.size(); ++i) series_of[series[i].camera_id] = i;

  // Conflict check before touching any data.
  std::map<std::size_t, std::vector<std::pair<Interval, std::size_t>>> claimed;
  for (std::size_t k = 0; k < events.size(); ++k) {
    const auto& e = events[k];
    if (e.duration_minutes <= 0) throw ConfigError("anomaly duration must be positive");
    if (!graph.contains(e.camera_id)) throw ConfigError("anomaly on unknown camera '" + e.camera_id + "'");
    const Interval iv{e.start, e.start + tagged_minutes(e)};
    for (std::size_t v : affected_nodes(e, graph)) {
      for (const auto& [other, j] : claimed[v]) {
        if (overlaps(other, iv)) {
          throw ConflictError("anomalies " + std::to_string(j) + " and " + std::to_string(k) + " overlap on camera '" +
                              graph.stations()[v].id + "' at " + e.start.to_string());
        }
      }
      claimed[v].push_back({iv, k});
    }
  }

  auto rng = stream(seed, 6);
  std::vector<InjectionRecord> records;
  auto span_of = [&](const std::string& id, Timestamp from, Timestamp to) {
    auto it = series_of.find(id);
    if (it == series_of.end()) throw DataError("no flow series for camera '" + id + "'");
    auto& pts = series[it->second].points;
    auto lo = std::lower_bound(pts.begin(), pts.end(), from, [](const FlowPoint& p, Timestamp t) { return p.time < t; });
    auto hi = std::lower_bound(lo, pts.end(), to, [](const FlowPoint& p, Timestamp t) { return p.time < t; });
    if (lo == hi) throw DataError("anomaly at " + from.to_string() + " lies outside the series of camera '" + id + "'");
    return std::pair{lo, hi};
  };

  for (const auto& e : events) {
    const Timestamp end = e.start + e.duration_minutes;
    switch (e.kind) {
      case AnomalyKind::SignalCut: {
        auto [lo, hi] = span_of(e.camera_id, e.start, end);
        lo->flow = 0.0;  // blank frame as the feed drops
        for (auto it = lo + 1; it != hi; ++it) it->flow.reset();
        records.push_back({e.camera_id, e.start, end, e.kind});
        break;
      }
      case AnomalyKind::Weather: {
        const std::size_t c = graph.index_of(e.camera_id);
        for (std::size_t v : node_subgraph(graph, c).members) {
          const double w = v == c ? 1.0 : 0.5 + 0.5 * graph.weights().at(c, v);
          const std::string& id = graph.stations()[v].id;
          auto [lo, hi] = span_of(id, e.start, end + kRecoveryMinutes);
          for (auto it = lo; it != hi; ++it) {
            // 3-minute onset ramp, full depth until `end`, then a raised-cosine recovery.
            constexpr double kRamp = 3.0;
            const double since = static_cast<double>(it->time.minutes - e.start.minutes) + 1.0;
            const double after = static_cast<double>(it->time.minutes - end.minutes) + 1.0;
            const double level = after > 0.0 ? 0.5 * (1.0 + std::cos(std::numbers::pi * after / kRecoveryMinutes))
                                             : std::min(1.0, since / kRamp);
            if (it->flow) *it->flow *= 1.0 - e.magnitude * w * level;
          }
          records.push_back({id, e.start, end + kRecoveryMinutes, e.kind});
        }
        break;
      }
      case AnomalyKind::VisualArtifact: {
        auto [lo, hi] = span_of(e.camera_id, e.start, end);
        for (auto it = lo; it != hi; ++it) {
          const double spike = e.magnitude * (0.5 + 0.5 * uniform(rng));
          if (it->flow) *it->flow = std::clamp(*it->flow + spike, 0.0, 1.0);
        }
        records.push_back({e.camera_id, e.start, end, e.kind});
        break;
      }
    }
  }
  std::stable_sort(records.begin(), records.end(), [](const InjectionRecord& a, const InjectionRecord& b) {
    return a.start < b.start;
  });
  return records;
}

SimulationResult simulate(const SimSpec& spec) {
  SimulationResult r;
  r.flows = simulate_flows(spec);
  const TrafficGraph graph = TrafficGraph::build(r.flows.stations, spec.threshold);
  r.events = spec.injections.empty() ? plan_anomalies(spec, graph) : spec.injections;
  r.truth = inject_anomalies(r.flows.series, graph, r.events, spec.seed);
  return r;
}

}  // namespace stgan
