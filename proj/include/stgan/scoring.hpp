#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stgan/model.hpp"
#include "stgan/truth.hpp"

namespace stgan {

struct ScoreConfig {
  double lambda = 1.0;     // weight on s_D
  double k_percent = 0.1;  // top-K percent labeled

  void validate() const;  // ConfigError
};

struct PointScore {
  double s_g = 0.0;  // squared prediction error, summed over features
  double s_d = 0.0;  // D(real) - D(fake), shared by the window's nodes
  double score = 0.0;
};

// Per-node scores of one window.
std::vector<PointScore> score_point(const Generator& gen, const Discriminator& disc, const GraphOperator& g,
                                    const SampleWindow& window, double lambda);

// Scores for many windows at once; result[w][n]. Parallel over chunks of windows.
std::vector<std::vector<PointScore>> score_windows(const Generator& gen, const Discriminator& disc,
                                                   const GraphOperator& g, std::span<const SampleWindow> windows,
                                                   double lambda, std::size_t threads = 1);

struct RankedPoint {
  std::int64_t time = 0;  // minutes
  std::size_t camera = 0;  // node index
  double score = 0.0;
};

// floor(K/100 * count). ConfigError unless K in (0, 100].
std::size_t top_k_count(std::size_t count, double k_percent);

/// Indices of the floor(K/100 * n) highest scores. Ties go to the earlier
/// time, then the lower camera index, so the result does not depend on the
/// input order and grows monotonically with K. Returned in ascending index order.
std::vector<std::size_t> label_top_k(std::span<const RankedPoint> points, double k_percent);

// TP / (TP + FP). ValidationError when nothing is labeled.
double precision(std::size_t tp, std::size_t fp);

struct ReportRow {
  std::string camera_id;
  std::size_t node = 0;
  Timestamp time;
  double s_g = 0.0;
  double s_d = 0.0;
  double score = 0.0;
  bool labeled = false;
  std::optional<AnomalyKind> truth;  // set when truth was attached and the row overlaps an injection
};

struct AnomalyReport {
  std::vector<ReportRow> rows;  // sorted by (time, node)
  std::size_t labeled = 0;
  std::size_t skipped = 0;
  bool has_truth = false;
  ScoreConfig config;

  std::size_t true_positives() const;
  std::size_t false_positives() const;
  // ValidationError if no truth is attached or nothing is labeled.
  double precision() const;
  // Re-applies top-K labeling to the stored scores.
  void relabel(double k_percent);
  void attach_truth(const std::vector<InjectionRecord>& records);
};

struct DetectOptions {
  ScoreConfig score;
  std::size_t recent = 12;
  std::size_t trend = 7;
  bool stitch_days = false;
  std::size_t threads = 1;
};

/// Scores every (node, time) with a full window history in `data` (targets
/// only in days after its context prefix) and labels the top K percent.
/// ValidationError when the checkpoint does not match the dataset; DataError
/// when no point can be scored.
AnomalyReport detect(const PreparedDataset& data, const Generator& gen, const Discriminator& disc,
                     const GraphOperator& g, const DetectOptions& options);

// CSV: camera_id,timestamp,s_g,s_d,score,labeled,truth_tag
void write_report_csv(const std::filesystem::path& path, const AnomalyReport& report);
AnomalyReport read_report_csv(const std::filesystem::path& path);
// {total, labeled, tp, fp, precision, skipped}; tp/fp/precision are null without truth.
nlohmann::json report_summary(const AnomalyReport& report);

struct PrecisionRow {
  double k_percent = 0.0;
  std::size_t labeled = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  double precision = 0.0;
  std::size_t by_kind[3] = {0, 0, 0};  // true positives per AnomalyKind
};

// One row per K over a report with truth attached; the report's own labels are untouched.
std::vector<PrecisionRow> evaluate_precision(const AnomalyReport& report, std::span<const double> k_percents);

}  // namespace stgan
