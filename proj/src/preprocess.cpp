#include "stgan/preprocess.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>

#include "stgan/csv.hpp"
#include "stgan/errors.hpp"

namespace stgan {

void FlowSeries::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0 && !(points[i - 1].time < points[i].time)) {
      throw DataError("camera '" + camera_id + "': timestamps not strictly increasing at " +
                      points[i].time.to_string());
    }
    if (points[i].flow && !(*points[i].flow >= 0.0 && *points[i].flow <= 1.0)) {
      throw DataError("camera '" + camera_id + "': flow outside [0,1] at " + points[i].time.to_string());
    }
  }
}

double compute_flow(double detected, double capacity) {
  if (!(capacity > 0.0)) throw ConfigError("vehicle capacity must be positive");
  if (detected < 0.0) throw DataError("detected vehicle count must be non-negative");
  return std::clamp(detected / capacity, 0.0, 1.0);
}

FlowSeries forward_fill(const FlowSeries& series, int cadence_minutes) {
  if (cadence_minutes <= 0) throw ConfigError("forward_fill cadence must be positive");
  series.validate();
  auto first_present = std::find_if(series.points.begin(), series.points.end(), [](const FlowPoint& p) { return p.flow.has_value(); });
  if (first_present == series.points.end()) {
    throw DataError("camera '" + series.camera_id + "': series has no observed values");
  }

  FlowSeries out{series.camera_id, {}};
  const std::int64_t start = series.points.front().time.minutes;
  const std::int64_t stop = series.points.back().time.minutes;
  out.points.reserve(static_cast<std::size_t>((stop - start) / cadence_minutes + 1));

  double last = *first_present->flow;  // head backfill
  std::size_t src = 0;
  for (std::int64_t m = start; m <= stop; m += cadence_minutes) {
    while (src < series.points.size() && series.points[src].time.minutes < m) {
      if (series.points[src].flow) last = *series.points[src].flow;
      ++src;
    }
    if (src < series.points.size() && series.points[src].time.minutes == m && series.points[src].flow) {
      last = *series.points[src].flow;
    }
    out.points.push_back(FlowPoint{Timestamp{m}, last});
  }
  return out;
}

FlowSeries downsample_5min(const FlowSeries& series) {
  FlowSeries out{series.camera_id, {}};
  std::size_t i = 0;
  const auto& pts = series.points;
  while (i < pts.size()) {
    const std::int64_t bin = pts[i].time.minutes - (((pts[i].time.minutes % 5) + 5) % 5);
    double sum = 0.0;
    std::size_t count = 0;
    while (i < pts.size() && pts[i].time.minutes < bin + 5) {
      if (!pts[i].flow) {
        throw DataError("camera '" + series.camera_id + "': downsample_5min needs a gap-free series, missing value at " +
                        pts[i].time.to_string());
      }
      sum += *pts[i].flow;
      ++count;
      ++i;
    }
    out.points.push_back(FlowPoint{Timestamp{bin}, sum / static_cast<double>(count)});
  }
  return out;
}

FlowSeries truncate_hours(const FlowSeries& series, int start_minute, int end_minute) {
  FlowSeries out{series.camera_id, {}};
  for (const auto& p : series.points) {
    const int clock = p.time.minute_of_day();
    if (clock >= start_minute && clock <= end_minute) out.points.push_back(p);
  }
  return out;
}

FlowSeries preprocess_series(const FlowSeries& raw, const PipelineConfig& config) {
  return truncate_hours(downsample_5min(forward_fill(raw, 1)), config.day_start, config.day_end);
}

TimeFeature encode_time_feature(Timestamp t) {
  TimeFeature e{};
  e[static_cast<std::size_t>(t.weekday())] = 1.0;
  e[7 + static_cast<std::size_t>(t.hour())] = 1.0;
  return e;
}

std::vector<std::string> PreparedDataset::station_order() const {
  std::vector<std::string> ids;
  for (const auto& s : stations) ids.push_back(s.id);
  return ids;
}

std::size_t PreparedDataset::day_of(std::size_t t) const {
  auto it = std::upper_bound(day_boundaries.begin(), day_boundaries.end(), t);
  return static_cast<std::size_t>(it - day_boundaries.begin()) - 1;
}

namespace {

std::vector<std::size_t> compute_day_boundaries(const std::vector<Timestamp>& times) {
  std::vector<std::size_t> b;
  for (std::size_t t = 0; t < times.size(); ++t) {
    if (t == 0 || times[t].day() != times[t - 1].day()) b.push_back(t);
  }
  return b;
}

}  // namespace

PreparedDataset assemble_dataset(const std::vector<FlowSeries>& series, const TrafficGraph& graph,
                                 const PipelineConfig& pipeline) {
  const std::size_t n = graph.size();
  std::unordered_map<std::string, const FlowSeries*> by_id;
  for (const auto& s : series) {
    if (!by_id.emplace(s.camera_id, &s).second) throw DataError("alignment: camera '" + s.camera_id + "' appears twice");
  }
  std::vector<std::string> missing, extra;
  for (const auto& st : graph.stations()) {
    if (!by_id.count(st.id)) missing.push_back(st.id);
  }
  std::set<std::string> graph_ids;
  for (const auto& st : graph.stations()) graph_ids.insert(st.id);
  for (const auto& s : series) {
    if (!graph_ids.count(s.camera_id)) extra.push_back(s.camera_id);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "alignment: camera set differs from graph stations;";
    for (const auto& id : missing) msg += " missing '" + id + "'";
    for (const auto& id : extra) msg += " unknown '" + id + "'";
    throw DataError(msg);
  }

  const FlowSeries& ref = *by_id.at(graph.stations().front().id);
  const std::size_t t_count = ref.points.size();
  if (t_count == 0) throw DataError("alignment: empty processed series");

  PreparedDataset data;
  data.stations = graph.stations();
  data.pipeline = pipeline;
  data.times.reserve(t_count);
  for (const auto& p : ref.points) {
    const int clock = p.time.minute_of_day();
    if (clock < pipeline.day_start || clock > pipeline.day_end) {
      throw DataError("alignment: timestamp " + p.time.to_string() + " lies outside the service day");
    }
    data.times.push_back(p.time);
  }

  data.X = Tensor({t_count, n, 1});
  std::string mismatches;
  for (std::size_t node = 0; node < n; ++node) {
    const FlowSeries& s = *by_id.at(graph.stations()[node].id);
    if (s.points.size() != t_count) {
      mismatches += " '" + s.camera_id + "' has " + std::to_string(s.points.size()) + " rows (expected " +
                    std::to_string(t_count) + ")";
      continue;
    }
    for (std::size_t t = 0; t < t_count; ++t) {
      if (s.points[t].time != data.times[t]) {
        mismatches += " '" + s.camera_id + "' at " + s.points[t].time.to_string() + " vs " + data.times[t].to_string();
        break;
      }
      if (!s.points[t].flow) {
        throw DataError("alignment: camera '" + s.camera_id + "' missing value at " + data.times[t].to_string());
      }
      data.X.at(t, node, 0) = *s.points[t].flow;
    }
  }
  if (!mismatches.empty()) throw DataError("alignment: time axes differ:" + mismatches);

  data.E_all = Tensor({t_count, kTimeFeatureSize});
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto e = encode_time_feature(data.times[t]);
    std::copy(e.begin(), e.end(), data.E_all.data().begin() + static_cast<std::ptrdiff_t>(t * kTimeFeatureSize));
  }
  data.day_boundaries = compute_day_boundaries(data.times);
  return data;
}

PreparedDataset slice_days(const PreparedDataset& data, std::size_t first_day, std::size_t last_day,
                           std::size_t context_days) {
  if (first_day > last_day || last_day >= data.num_days()) {
    throw ConfigError("day range [" + std::to_string(first_day) + ", " + std::to_string(last_day) +
                      "] outside dataset of " + std::to_string(data.num_days()) + " days");
  }
  if (context_days > last_day - first_day) throw ConfigError("context days leave nothing to score");
  const std::size_t begin = data.day_boundaries[first_day];
  const std::size_t end = last_day + 1 < data.num_days() ? data.day_boundaries[last_day + 1] : data.num_times();
  const std::size_t n = data.num_nodes();
  const std::size_t f = data.num_features();

  PreparedDataset out;
  out.stations = data.stations;
  out.pipeline = data.pipeline;
  out.context_days = context_days;
  out.times.assign(data.times.begin() + static_cast<std::ptrdiff_t>(begin), data.times.begin() + static_cast<std::ptrdiff_t>(end));
  const std::size_t rows = end - begin;
  std::vector<double> x(data.X.data().begin() + static_cast<std::ptrdiff_t>(begin * n * f),
                        data.X.data().begin() + static_cast<std::ptrdiff_t>(end * n * f));
  out.X = Tensor({rows, n, f}, std::move(x));
  std::vector<double> e(data.E_all.data().begin() + static_cast<std::ptrdiff_t>(begin * kTimeFeatureSize),
                        data.E_all.data().begin() + static_cast<std::ptrdiff_t>(end * kTimeFeatureSize));
  out.E_all = Tensor({rows, kTimeFeatureSize}, std::move(e));
  out.day_boundaries = compute_day_boundaries(out.times);
  return out;
}

WindowSet build_window_set(const PreparedDataset& data, const WindowConfig& config) {
  if (config.recent < 1 || config.trend < 1) throw ConfigError("window lengths must be at least 1");
  WindowSet set;
  const std::size_t n = data.num_nodes();
  const std::size_t f = data.num_features();
  const std::size_t slice = n * f;
  if (data.num_times() == 0) return set;

  std::unordered_map<std::int64_t, std::size_t> row_at;
  row_at.reserve(data.num_times());
  for (std::size_t t = 0; t < data.num_times(); ++t) row_at.emplace(data.times[t].minutes, t);

  const auto x = data.X.data();
  auto copy_slice = [&](std::size_t row, std::span<double> dst) {
    const auto src = x.subspan(row * slice, slice);
    std::copy(src.begin(), src.end(), dst.begin());
  };

  std::vector<std::size_t> trend_rows(config.trend);
  for (std::size_t t = 0; t < data.num_times(); ++t) {
    const std::size_t day = data.day_of(t);
    if (day < config.first_target_day) continue;

    const std::size_t day_start = data.day_boundaries[day];
    bool ok = config.stitch_days ? t >= config.recent : t - day_start >= config.recent;
    for (std::size_t k = 0; ok && k < config.trend; ++k) {
      const std::int64_t back = static_cast<std::int64_t>(config.trend - k);
      auto it = row_at.find(data.times[t].minutes - back * kMinutesPerDay);
      if (it == row_at.end()) {
        ok = false;
      } else {
        trend_rows[k] = it->second;
      }
    }
    if (!ok) {
      ++set.skipped;
      continue;
    }

    SampleWindow w;
    w.t = t;
    w.recent = Tensor({config.recent, n, f});
    for (std::size_t k = 0; k < config.recent; ++k) {
      copy_slice(t - config.recent + k, w.recent.data().subspan(k * slice, slice));
    }
    w.trend = Tensor({config.trend, n, f});
    for (std::size_t k = 0; k < config.trend; ++k) copy_slice(trend_rows[k], w.trend.data().subspan(k * slice, slice));
    w.external = encode_time_feature(data.times[t]);
    w.target = Tensor({n, f});
    copy_slice(t, w.target.data());
    set.windows.push_back(std::move(w));
  }
  return set;
}

std::vector<SampleWindow> build_windows(const PreparedDataset& data, std::size_t recent, std::size_t trend) {
  return build_window_set(data, WindowConfig{recent, trend, false, 0}).windows;
}

std::vector<FlowSeries> read_flow_csv(const std::filesystem::path& path, const std::map<std::string, double>* capacities) {
  const CsvTable table = read_csv(path);
  const auto c_id = table.column("camera_id");
  const auto c_ts = table.column("timestamp");
  const bool counts = !table.has_column("flow") && table.has_column("count");
  const auto c_val = table.column(counts ? "count" : "flow");
  if (counts && capacities == nullptr) throw ConfigError("flow file holds vehicle counts; a capacity table is required");

  std::vector<FlowSeries> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& row : table.rows) {
    const std::string& id = row[c_id];
    auto [it, inserted] = index.emplace(id, out.size());
    if (inserted) out.push_back(FlowSeries{id, {}});
    FlowPoint p{Timestamp::parse(row[c_ts]), std::nullopt};
    if (!row[c_val].empty()) {
      const double v = parse_double(row[c_val], counts ? "count" : "flow");
      if (counts) {
        auto cap = capacities->find(id);
        if (cap == capacities->end()) throw ConfigError("no capacity configured for camera '" + id + "'");
        p.flow = compute_flow(v, cap->second);
      } else {
        p.flow = v;
      }
    }
    out[it->second].points.push_back(p);
  }
  for (auto& s : out) {
    std::stable_sort(s.points.begin(), s.points.end(), [](const FlowPoint& a, const FlowPoint& b) { return a.time < b.time; });
    s.validate();
  }
  return out;
}

void write_flow_csv(const std::filesystem::path& path, const std::vector<FlowSeries>& series) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "camera_id,timestamp,flow\n";
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      out << s.camera_id << ',' << p.time.to_string() << ',';
      if (p.flow) out << format_double(*p.flow);
      out << '\n';
    }
  }
}

std::map<std::string, double> read_capacities_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const auto c_id = table.column("camera_id");
  const auto c_cap = table.column("capacity");
  std::map<std::string, double> caps;
  for (const auto& row : table.rows) {
    const double c = parse_double(row[c_cap], "capacity");
    if (!(c > 0.0)) throw ConfigError("capacity for camera '" + row[c_id] + "' must be positive");
    caps[row[c_id]] = c;
  }
  return caps;
}

}  // namespace stgan
