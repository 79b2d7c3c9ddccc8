#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stgan/graph.hpp"
#include "stgan/preprocess.hpp"
#include "stgan/truth.hpp"

namespace stgan {

/// One anomaly to inject. `magnitude` is the relative depression depth for
/// weather and the signed spike amplitude for visual artifacts; signal cuts
/// ignore it. Weather is followed by a 10-minute smooth recovery that belongs
/// to the same event.
struct AnomalyEvent {
  AnomalyKind kind = AnomalyKind::SignalCut;
  std::string camera_id;
  Timestamp start;
  int duration_minutes = 10;
  double magnitude = 0.0;
};

inline constexpr int kRecoveryMinutes = 10;

struct SimSpec {
  std::size_t n_cameras = 42;
  std::size_t n_days = 30;
  std::uint64_t seed = 0;
  std::string start_date = "2023-01-02";  // a Monday
  int day_start = 4 * 60 + 53;
  int day_end = 21 * 60 + 9;  // the 21:00 bin is complete and the 21:05 bin is truncated

  // Station bounding box (degrees).
  double lat_min = 57.675, lat_max = 57.735;
  double lon_min = 11.915, lon_max = 12.025;

  // Daily profile: base level plus Gaussian rush-hour and midday bumps (minutes, flow units).
  double base_level = 0.10;
  double morning_peak = 8 * 60, morning_width = 50, morning_amp = 0.40;
  double evening_peak = 16 * 60 + 30, evening_width = 65, evening_amp = 0.42;
  double midday_peak = 12 * 60 + 30, midday_width = 150, midday_amp = 0.14;
  double weekend_rush_factor = 0.35;   // rush bumps scaled on Saturday/Sunday
  double weekend_midday_factor = 1.6;  // midday bump scaled on Saturday/Sunday
  double camera_spread = 0.2;          // per-camera amplitude scale in [1-s, 1+s]
  double peak_jitter = 12.0;           // per-camera peak shift, minutes
  // Scale and shift vary smoothly in space: nearby cameras carry similar
  // profiles, with this correlation length in metres.
  double profile_length = 4000.0;
  double day_variation = 0.02;         // std of the per-day multiplicative level
  double noise_std = 0.03;             // per-minute, spatially correlated
  double missing_rate = 0.002;         // isolated missing minutes

  double threshold = kDefaultAdjacencyThreshold;  // neighbourhood used by weather events

  // Random anomalies as a fraction of the simulated 5-minute points (each
  // camera-day contributes 194 service slots). Ignored when `injections` is non-empty.
  double anomaly_rate = 0.001;
  // Relative shares of the tagged points per kind; the defaults follow the mix
  // of verified causes seen on real camera data, dominated by signal cuts.
  double signal_cut_share = 0.94;
  double weather_share = 0.03;
  double visual_artifact_share = 0.03;
  double weather_depth = 0.7;
  double artifact_amplitude = 0.3;
  std::vector<AnomalyEvent> injections;

  void validate() const;  // ConfigError
};

struct SimulatedFlows {
  std::vector<Station> stations;
  std::vector<FlowSeries> series;  // 1-minute cadence over [day_start, day_end] of every day
};

/// Seeded stations and clean flows (before any anomaly).
SimulatedFlows simulate_flows(const SimSpec& spec);

// Deterministic profile value without noise or day variation (used by tests).
double clean_profile(const SimSpec& spec, int minute_of_day, int weekday, double camera_scale, double camera_shift);

/// Random events totalling about anomaly_rate of the 5-minute points, split
/// by kind share and spread evenly over the days, slot-aligned within
/// 07:00-19:00, at least an hour apart on any camera.
std::vector<AnomalyEvent> plan_anomalies(const SimSpec& spec, const TrafficGraph& graph);

/// Applies the events in place and returns one truth record per affected
/// camera. Signal cut: a blank frame (flow 0) then missing values until flow
/// resumes. Weather: depression of the centre camera and its graph
/// neighbourhood, weighted by adjacency, easing off over the recovery. Visual artifact: per-minute spikes
/// with the event's sign. Overlapping events on one camera raise ConflictError.
std::vector<InjectionRecord> inject_anomalies(std::vector<FlowSeries>& series, const TrafficGraph& graph,
                                              const std::vector<AnomalyEvent>& events, std::uint64_t seed);

struct SimulationResult {
  SimulatedFlows flows;
  std::vector<AnomalyEvent> events;
  std::vector<InjectionRecord> truth;
};

// simulate_flows + plan_anomalies (unless explicit) + inject_anomalies.
SimulationResult simulate(const SimSpec& spec);

}  // namespace stgan
