#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stgan/graph.hpp"
#include "stgan/tensor.hpp"
#include "stgan/timestamp.hpp"

namespace stgan {

struct FlowPoint {
  Timestamp time;
  std::optional<double> flow;  // fraction in [0,1], empty when missing
};

struct FlowSeries {
  std::string camera_id;
  std::vector<FlowPoint> points;  // strictly increasing in time

  // Throws DataError on unordered timestamps or flows outside [0,1].
  void validate() const;
};

inline constexpr std::size_t kTimeFeatureSize = 31;  // 7 weekday + 24 hour slots
using TimeFeature = std::array<double, kTimeFeatureSize>;

struct PipelineConfig {
  int day_start = 4 * 60 + 55;  // minute of day, inclusive
  int day_end = 21 * 60;        // inclusive
};

/// detected / capacity clamped to [0,1]. Throws ConfigError for capacity <= 0.
double compute_flow(double detected, double capacity);

/// Fills every `cadence_minutes` slot between the first and last timestamp.
/// Gaps take the most recent present value; a leading gap is back-filled
/// from the first present value. Throws DataError if nothing is present.
FlowSeries forward_fill(const FlowSeries& series, int cadence_minutes = 1);

/// Means over wall-clock aligned 5-minute bins [hh:m0, hh:m0+5), stamped at
/// the bin start. Partial bins at either end average what they hold.
/// Input must be gap-free (no missing flows).
FlowSeries downsample_5min(const FlowSeries& series);

/// Keeps points whose clock time lies in [start, end] inclusive.
FlowSeries truncate_hours(const FlowSeries& series, int start_minute = 4 * 60 + 55, int end_minute = 21 * 60);

/// forward_fill -> downsample_5min -> truncate_hours.
FlowSeries preprocess_series(const FlowSeries& raw, const PipelineConfig& config = {});

/// One-hot weekday (Monday = slot 0) followed by one-hot hour (slots 7..30).
TimeFeature encode_time_feature(Timestamp t);

/// Model-ready tensors for one graph.
///
/// X is T x N x F (F = 1, flow) in graph station order; E_all holds the
/// encoded time feature of every row. The first `context_days` service days
/// only provide history and are not scored by detection.
struct PreparedDataset {
  std::vector<Station> stations;
  std::vector<Timestamp> times;
  Tensor X;
  Tensor E_all;
  std::vector<std::size_t> day_boundaries;  // first index of each service day
  std::size_t context_days = 0;
  PipelineConfig pipeline;

  std::size_t num_times() const { return times.size(); }
  std::size_t num_nodes() const { return stations.size(); }
  std::size_t num_features() const { return X.rank() == 3 ? X.dim(2) : 0; }
  std::size_t num_days() const { return day_boundaries.size(); }
  std::vector<std::string> station_order() const;
  // Service-day ordinal of row t.
  std::size_t day_of(std::size_t t) const;
};

/// Merges processed per-camera series into graph order. All series must
/// share one time axis and the camera set must equal the graph's stations.
PreparedDataset assemble_dataset(const std::vector<FlowSeries>& series, const TrafficGraph& graph,
                                 const PipelineConfig& pipeline = {});

/// Keeps days [first_day, last_day] (ordinals); the leading `context_days` of
/// the kept range are marked as history only.
PreparedDataset slice_days(const PreparedDataset& data, std::size_t first_day, std::size_t last_day,
                           std::size_t context_days);

struct WindowConfig {
  std::size_t recent = 12;  // L_r, 5-minute steps
  std::size_t trend = 7;    // L_d, days
  // Allow the recent segment to reach back into the previous service day.
  bool stitch_days = false;
  // Targets before this service-day ordinal are not emitted.
  std::size_t first_target_day = 0;
};

struct SampleWindow {
  std::size_t t = 0;  // target row in the dataset
  Tensor recent;      // L_r x N x F, rows t-L_r .. t-1
  Tensor trend;       // L_d x N x F, same clock time, oldest day first
  TimeFeature external{};
  Tensor target;      // N x F
};

struct WindowSet {
  std::vector<SampleWindow> windows;  // chronological
  std::size_t skipped = 0;            // eligible targets lacking history
};

/// Windows for every target with a full recent and trend history.
WindowSet build_window_set(const PreparedDataset& data, const WindowConfig& config);
std::vector<SampleWindow> build_windows(const PreparedDataset& data, std::size_t recent, std::size_t trend);

// Flow CSV: camera_id,timestamp,flow (empty flow = missing). A `count` column
// may replace `flow`, in which case capacities (camera_id -> capacity) are required.
std::vector<FlowSeries> read_flow_csv(const std::filesystem::path& path,
                                      const std::map<std::string, double>* capacities = nullptr);
void write_flow_csv(const std::filesystem::path& path, const std::vector<FlowSeries>& series);
std::map<std::string, double> read_capacities_csv(const std::filesystem::path& path);

}  // namespace stgan
