#include "stgan/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "stgan/csv.hpp"
#include "stgan/errors.hpp"
#include "stgan/trainer.hpp"

namespace stgan {

void ScoreConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (!(k_percent > 0.0 && k_percent <= 100.0)) throw ConfigError("K must be in (0, 100], got " + format_double(k_percent));
}

namespace {

void fill_scores(const BatchOutputs& out, const Mat& target, std::size_t nodes, double lambda,
                 std::vector<std::vector<PointScore>>& dst, std::size_t first) {
  const auto n = static_cast<Eigen::Index>(nodes);
  for (Eigen::Index b = 0; b < out.p_real.size(); ++b) {
    auto& row = dst[first + static_cast<std::size_t>(b)];
    row.resize(nodes);
    const double s_d = out.p_real(b) - out.p_fake(b);
    for (Eigen::Index v = 0; v < n; ++v) {
      const double s_g = (out.prediction.row(b * n + v) - target.row(b * n + v)).squaredNorm();
      row[static_cast<std::size_t>(v)] = PointScore{s_g, s_d, s_g + lambda * s_d};
    }
  }
}

}  // namespace

std::vector<PointScore> score_point(const Generator& gen, const Discriminator& disc, const GraphOperator& g,
                                    const SampleWindow& window, double lambda) {
  const WindowBatch wb = WindowBatch::from_window(window);
  std::vector<std::vector<PointScore>> out(1);
  fill_scores(evaluate_batch(gen, disc, g, wb), wb.target, wb.nodes, lambda, out, 0);
  return out[0];
}

std::vector<std::vector<PointScore>> score_windows(const Generator& gen, const Discriminator& disc,
                                                   const GraphOperator& g, std::span<const SampleWindow> windows,
                                                   double lambda, std::size_t threads) {
  constexpr std::size_t kChunk = 32;
  std::vector<std::vector<PointScore>> out(windows.size());
  const std::size_t n_chunks = (windows.size() + kChunk - 1) / kChunk;
  auto run = [&](std::size_t k) {
    const std::size_t lo = k * kChunk;
    const std::size_t len = std::min(kChunk, windows.size() - lo);
    std::vector<const SampleWindow*> ptrs(len);
    for (std::size_t i = 0; i < len; ++i) ptrs[i] = &windows[lo + i];
    const WindowBatch wb = WindowBatch::from_windows(ptrs);
    fill_scores(evaluate_batch(gen, disc, g, wb), wb.target, wb.nodes, lambda, out, lo);
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n_chunks));
  if (workers == 1) {
    for (std::size_t k = 0; k < n_chunks; ++k) run(k);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < n_chunks; k += workers) run(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::size_t top_k_count(std::size_t count, double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) throw ConfigError("K must be in (0, 100], got " + format_double(k_percent));
  // The tiny offset absorbs representation error such as 0.1 * 1000 / 100 = 0.99999...
  const double exact = k_percent * static_cast<double>(count) / 100.0;
  return std::min(count, static_cast<std::size_t>(std::floor(exact * (1.0 + 1e-12))));
}

std::vector<std::size_t> label_top_k(std::span<const RankedPoint> points, double k_percent) {
  if (points.empty()) throw DataError("label_top_k: no scores");
  const std::size_t k = top_k_count(points.size(), k_percent);
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    const auto& pa = points[a];
    const auto& pb = points[b];
    if (pa.score != pb.score) return pa.score > pb.score;
    if (pa.time != pb.time) return pa.time < pb.time;
    if (pa.camera != pb.camera) return pa.camera < pb.camera;
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double precision(std::size_t tp, std::size_t fp) {
  if (tp + fp == 0) throw ValidationError("precision is undefined: no points are labeled");
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

std::size_t AnomalyReport::true_positives() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += (r.labeled && r.truth) ? 1 : 0;
  return n;
}

std::size_t AnomalyReport::false_positives() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += (r.labeled && !r.truth) ? 1 : 0;
  return n;
}

double AnomalyReport::precision() const {
  if (!has_truth) throw ValidationError("report has no ground truth attached");
  return stgan::precision(true_positives(), false_positives());
}

namespace {

std::vector<RankedPoint> ranked(const std::vector<ReportRow>& rows) {
  std::vector<RankedPoint> pts(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) pts[i] = {rows[i].time.minutes, rows[i].node, rows[i].score};
  return pts;
}

}  // namespace

void AnomalyReport::relabel(double k_percent) {
  const auto pts = ranked(rows);
  for (auto& r : rows) r.labeled = false;
  const auto chosen = label_top_k(pts, k_percent);
  for (std::size_t i : chosen) rows[i].labeled = true;
  labeled = chosen.size();
  config.k_percent = k_percent;
}

void AnomalyReport::attach_truth(const std::vector<InjectionRecord>& records) {
  std::unordered_map<std::string, std::vector<InjectionRecord>> by_camera;
  for (const auto& r : records) by_camera[r.camera_id].push_back(r);
  for (auto& row : rows) {
    auto it = by_camera.find(row.camera_id);
    row.truth = it == by_camera.end() ? std::nullopt : truth_at(it->second, row.camera_id, row.time);
  }
  has_truth = true;
}

AnomalyReport detect(const PreparedDataset& data, const Generator& gen, const Discriminator& disc,
                     const GraphOperator& g, const DetectOptions& options) {
  options.score.validate();
  if (data.num_times() == 0) throw DataError("test dataset is empty");
  const ModelDims& dims = gen.dims();
  if (dims.recent != options.recent || dims.trend != options.trend) {
    throw ValidationError("checkpoint window lengths (L_r=" + std::to_string(dims.recent) + ", L_d=" +
                          std::to_string(dims.trend) + ") differ from the requested ones");
  }
  if (g.nodes() != data.num_nodes()) throw ValidationError("graph and dataset node counts differ");
  if (data.num_features() != dims.features) throw ValidationError("dataset feature count differs from the checkpoint");

  WindowConfig wc{options.recent, options.trend, options.stitch_days, data.context_days};
  const WindowSet set = build_window_set(data, wc);
  if (set.windows.empty()) throw DataError("no test point has a full window history");
  const auto scores = score_windows(gen, disc, g, set.windows, options.score.lambda, options.threads);

  AnomalyReport report;
  report.config = options.score;
  report.skipped = set.skipped * data.num_nodes();
  const auto ids = data.station_order();
  report.rows.reserve(set.windows.size() * data.num_nodes());
  for (std::size_t w = 0; w < set.windows.size(); ++w) {
    const Timestamp t = data.times[set.windows[w].t];
    for (std::size_t v = 0; v < data.num_nodes(); ++v) {
      const auto& s = scores[w][v];
      report.rows.push_back(ReportRow{ids[v], v, t, s.s_g, s.s_d, s.score, false, std::nullopt});
    }
  }
  report.relabel(options.score.k_percent);
  return report;
}

void write_report_csv(const std::filesystem::path& path, const AnomalyReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "camera_id,timestamp,s_g,s_d,score,labeled,truth_tag\n";
  for (const auto& r : report.rows) {
    out << r.camera_id << ',' << r.time.to_string() << ',' << format_double(r.s_g) << ',' << format_double(r.s_d) << ','
        << format_double(r.score) << ',' << (r.labeled ? 1 : 0) << ',';
    if (report.has_truth) out << (r.truth ? kind_name(*r.truth) : "none");
    out << '\n';
  }
}

AnomalyReport read_report_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const auto c_id = table.column("camera_id");
  const auto c_ts = table.column("timestamp");
  const auto c_sg = table.column("s_g");
  const auto c_sd = table.column("s_d");
  const auto c_score = table.column("score");
  const auto c_lab = table.column("labeled");
  const auto c_tag = table.column("truth_tag");
  AnomalyReport report;
  std::unordered_map<std::string, std::size_t> node_of;
  for (const auto& row : table.rows) {
    auto [it, inserted] = node_of.emplace(row[c_id], node_of.size());
    ReportRow r;
    r.camera_id = row[c_id];
    r.node = it->second;
    r.time = Timestamp::parse(row[c_ts]);
    r.s_g = parse_double(row[c_sg], "s_g");
    r.s_d = parse_double(row[c_sd], "s_d");
    r.score = parse_double(row[c_score], "score");
    r.labeled = row[c_lab] == "1";
    if (!row[c_tag].empty()) {
      report.has_truth = true;
      if (row[c_tag] != "none") r.truth = parse_kind(row[c_tag]);
    }
    report.labeled += r.labeled ? 1 : 0;
    report.rows.push_back(std::move(r));
  }
  return report;
}

nlohmann::json report_summary(const AnomalyReport& report) {
  nlohmann::json j;
  j["total"] = report.rows.size();
  j["labeled"] = report.labeled;
  j["skipped"] = report.skipped;
  j["k_percent"] = report.config.k_percent;
  j["lambda"] = report.config.lambda;
  if (report.has_truth) {
    const auto tp = report.true_positives();
    const auto fp = report.false_positives();
    j["tp"] = tp;
    j["fp"] = fp;
    j["precision"] = tp + fp == 0 ? nlohmann::json(nullptr) : nlohmann::json(precision(tp, fp));
  } else {
    j["tp"] = nullptr;
    j["fp"] = nullptr;
    j["precision"] = nullptr;
  }
  return j;
}

std::vector<PrecisionRow> evaluate_precision(const AnomalyReport& report, std::span<const double> k_percents) {
  if (!report.has_truth) throw ValidationError("report has no ground truth attached");
  const auto pts = ranked(report.rows);
  std::vector<PrecisionRow> out;
  for (double k : k_percents) {
    PrecisionRow row;
    row.k_percent = k;
    for (std::size_t i : label_top_k(pts, k)) {
      ++row.labeled;
      const auto& truth = report.rows[i].truth;
      if (truth) {
        ++row.tp;
        ++row.by_kind[static_cast<int>(*truth)];
      } else {
        ++row.fp;
      }
    }
    row.precision = row.labeled == 0 ? 0.0 : precision(row.tp, row.fp);
    out.push_back(row);
  }
  return out;
}

}  // namespace stgan
