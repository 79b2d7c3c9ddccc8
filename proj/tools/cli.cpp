#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "stgan/checkpoint.hpp"
#include "stgan/csv.hpp"
#include "stgan/dataset_io.hpp"
#include "stgan/errors.hpp"
#include "stgan/scoring.hpp"
#include "stgan/simulate.hpp"
#include "stgan/trainer.hpp"

namespace stgan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Options of one subcommand, bound to plain fields. Resolution order is
/// flag, then config file, then the field's initial value.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* add(const std::string& name, T& target, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, target, help)->capture_default_str();
    bind(name, opt, target);
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool& target, const std::string& help) {
    CLI::Option* opt = app_->add_flag("--" + name, target, help);
    bind(name, opt, target);
    return opt;
  }

  void apply_config(const json& doc, const std::string& section) {
    const json& cfg = doc.contains(section) && doc.at(section).is_object() ? doc.at(section) : doc;
    for (const auto& [key, value] : cfg.items()) {
      if (value.is_object()) continue;  // another subcommand's section
      auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == key; });
      if (it == entries_.end()) throw ConfigError("config key '" + key + "' is not an option of '" + section + "'");
      if (it->option->count() > 0) continue;
      try {
        it->load(value);
      } catch (const json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
      }
    }
  }

  json echo() const {
    json out = json::object();
    for (const auto& e : entries_) {
      if (e.name != "config") out[e.name] = e.save();
    }
    return out;
  }

 private:
  struct Entry {
    std::string name;
    CLI::Option* option;
    std::function<void(const json&)> load;
    std::function<json()> save;
  };

  template <class T>
  void bind(const std::string& name, CLI::Option* opt, T& target) {
    entries_.push_back({name, opt, [&target](const json& j) { target = j.get<T>(); }, [&target] { return json(target); }});
  }

  CLI::App* app_;
  std::vector<Entry> entries_;
};

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out;
};

void add_common(Options& o, Common& c, bool with_out = true) {
  o.add("config", c.config, "JSON config file; flags override its values");
  o.add("seed", c.seed, "Seed for every stochastic stage");
  o.add("threads", c.threads, "Upper bound on worker threads");
  if (with_out) o.add("out", c.out, "Output directory")->required();
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is required");
  if (!fs::exists(path)) throw ConfigError(what + " '" + path + "' does not exist");
}

/// Writes into a sibling staging directory and moves the results into place
/// once the subcommand has succeeded.
class OutputDir {
 public:
  explicit OutputDir(const std::string& target) : target_(target) {
    if (target_.empty()) throw ConfigError("--out is required");
    target_ = fs::absolute(target_).lexically_normal();
    if (!target_.has_filename()) target_ = target_.parent_path();
    staging_ = target_;
    staging_ += ".partial";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;
  ~OutputDir() {
    std::error_code ec;
    if (!committed_) fs::remove_all(staging_, ec);
  }

  fs::path path(const std::string& name) const { return staging_ / name; }

  void commit() {
    if (!fs::exists(target_)) {
      if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
      fs::rename(staging_, target_);
    } else {
      for (const auto& entry : fs::directory_iterator(staging_)) {
        const fs::path dst = target_ / entry.path().filename();
        if (fs::is_directory(dst) && entry.is_directory()) fs::remove_all(dst);
        fs::rename(entry.path(), dst);
      }
      fs::remove_all(staging_);
    }
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_run_json(const OutputDir& out, const std::string& command, const json& config) {
  write_json(out.path("run.json"), json{{"command", command}, {"config", config}});
}

json load_config(const std::string& path) {
  require_file(path, "config file");
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  SimSpec spec;
};

void run_simulate(SimulateArgs& a, const json& config) {
  a.spec.seed = a.common.seed;
  const SimulationResult sim = simulate(a.spec);
  OutputDir out(a.common.out);
  write_flow_csv(out.path("flows.csv"), sim.flows.series);
  write_stations_csv(out.path("stations.csv"), sim.flows.stations);
  write_truth_csv(out.path("truth.csv"), sim.truth);
  write_run_json(out, "simulate", config);
  out.commit();
  std::cout << "simulated " << sim.flows.stations.size() << " cameras x " << a.spec.n_days << " days, "
            << sim.events.size() << " anomaly events (" << sim.truth.size() << " truth records)\n";
}

struct PreprocessArgs {
  Common common;
  std::string flows;
  std::string stations;
  std::string capacities;
  std::string edges;
  double threshold = kDefaultAdjacencyThreshold;
  std::string day_start = "04:55";
  std::string day_end = "21:00";
  long from_day = 0;
  long to_day = -1;
  std::size_t context_days = 0;
};

void run_preprocess(PreprocessArgs& a, const json& config) {
  require_file(a.flows, "flow CSV");
  require_file(a.stations, "stations CSV");
  std::map<std::string, double> caps;
  if (!a.capacities.empty()) {
    require_file(a.capacities, "capacity CSV");
    caps = read_capacities_csv(a.capacities);
  }
  EdgeList edges;
  if (!a.edges.empty()) {
    require_file(a.edges, "edge CSV");
    edges = read_edges_csv(a.edges);
  }
  const auto stations = read_stations_csv(a.stations);
  const TrafficGraph graph = TrafficGraph::build(stations, a.threshold, edges);
  const PipelineConfig pipeline{parse_clock(a.day_start), parse_clock(a.day_end)};

  const auto raw = read_flow_csv(a.flows, a.capacities.empty() ? nullptr : &caps);
  std::vector<FlowSeries> processed;
  processed.reserve(raw.size());
  for (const auto& s : raw) processed.push_back(preprocess_series(s, pipeline));
  PreparedDataset data = assemble_dataset(processed, graph, pipeline);

  if (a.from_day < 0) throw ConfigError("--from-day must be >= 0");
  const auto days = static_cast<long>(data.num_days());
  const long last = a.to_day < 0 ? days - 1 : a.to_day;
  const long first = a.from_day - static_cast<long>(a.context_days);
  if (first < 0) throw ConfigError("--context-days reaches before the first day");
  if (last >= days || last < a.from_day) {
    throw ConfigError("day range [" + std::to_string(a.from_day) + ", " + std::to_string(last) + "] is outside the " +
                      std::to_string(days) + " available days");
  }
  if (first != 0 || last != days - 1 || a.context_days != 0) {
    data = slice_days(data, static_cast<std::size_t>(first), static_cast<std::size_t>(last), a.context_days);
  }

  OutputDir out(a.common.out);
  write_dataset(out.path("."), data, config);
  write_run_json(out, "preprocess", config);
  out.commit();
  std::cout << "prepared " << data.num_times() << " time steps x " << data.num_nodes() << " cameras over "
            << data.num_days() << " days (" << data.context_days << " context)\n";
}

struct TrainArgs {
  Common common;
  TrainConfig train;
  std::string data;
  std::string edges;
  double threshold = kDefaultAdjacencyThreshold;
  bool stitch_days = false;
};

json graph_config(const TrafficGraph& graph) {
  json edges = json::array();
  for (const auto& [a, b] : graph.forced_edges()) edges.push_back({a, b});
  return json{{"threshold", graph.threshold()}, {"sigma", graph.sigma()}, {"forced_edges", edges}};
}

void run_train(TrainArgs& a, const json& config) {
  require_file(a.data, "dataset directory");
  a.train.seed = a.common.seed;
  a.train.threads = a.common.threads;
  a.train.validate();
  EdgeList edges;
  if (!a.edges.empty()) {
    require_file(a.edges, "edge CSV");
    edges = read_edges_csv(a.edges);
  }
  const PreparedDataset data = read_dataset(a.data);
  const TrafficGraph graph = TrafficGraph::build(data.stations, a.threshold, edges);
  const GraphOperator g = GraphOperator::from_graph(graph);
  const WindowSet set = build_window_set(data, {a.train.recent, a.train.trend, a.stitch_days, data.context_days});
  if (set.windows.empty()) throw TrainingError("dataset yields no training windows");

  OutputDir out(a.common.out);
  CheckpointHeader header;
  header.dims = a.train.dims();
  header.station_order = data.station_order();
  header.graph_config = graph_config(graph);

  std::ofstream metrics(out.path("metrics.csv"));
  write_metrics_header(metrics);
  TrainHooks hooks;
  hooks.on_step = [&](const StepMetrics& m) { write_metrics_row(metrics, m); };
  hooks.on_epoch = [&](std::size_t epoch, const Generator& gen, const Discriminator& disc) {
    metrics.flush();
    save_checkpoint(out.path("epoch_" + std::to_string(epoch) + ".json"), header, gen, disc);
    std::cerr << "epoch " << epoch << " done\n";
  };
  const TrainResult result = train(set.windows, g, a.train, hooks);
  metrics.close();
  save_checkpoint(out.path("final.json"), header, result.generator, result.discriminator);
  write_run_json(out, "train", config);
  out.commit();

  const auto& m = result.metrics.back();
  std::cout << "trained on " << set.windows.size() << " windows (" << set.skipped << " skipped), "
            << result.metrics.size() << " steps; last step d_loss=" << m.d_loss << " d_acc=" << m.d_accuracy
            << " g_mse=" << m.g_mse << "\n";
}

TrafficGraph graph_from_checkpoint(const Checkpoint& ckpt, const std::vector<Station>& stations) {
  const json& gc = ckpt.header.graph_config;
  EdgeList edges;
  if (gc.contains("forced_edges")) {
    for (const auto& e : gc.at("forced_edges")) edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  }
  return TrafficGraph::build(stations, gc.value("threshold", kDefaultAdjacencyThreshold), edges);
}

struct DetectArgs {
  Common common;
  std::string data;
  std::string ckpt;
  std::string truth;
  double k = 0.1;
  double lambda = 1.0;
  bool stitch_days = false;
};

void run_detect(DetectArgs& a, const json& config) {
  require_file(a.data, "dataset directory");
  require_file(a.ckpt, "checkpoint");
  const PreparedDataset data = read_dataset(a.data);
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  validate_station_order(ckpt.header, data.station_order());
  const GraphOperator g = GraphOperator::from_graph(graph_from_checkpoint(ckpt, data.stations));

  DetectOptions opt;
  opt.score = ScoreConfig{a.lambda, a.k};
  opt.recent = ckpt.header.dims.recent;
  opt.trend = ckpt.header.dims.trend;
  opt.stitch_days = a.stitch_days;
  opt.threads = a.common.threads;
  AnomalyReport report = detect(data, ckpt.generator, ckpt.discriminator, g, opt);
  if (!a.truth.empty()) {
    require_file(a.truth, "truth CSV");
    report.attach_truth(read_truth_csv(a.truth));
  }

  OutputDir out(a.common.out);
  write_report_csv(out.path("report.csv"), report);
  const json summary = report_summary(report);
  write_json(out.path("summary.json"), summary);
  write_run_json(out, "detect", config);
  out.commit();
  std::cout << summary.dump() << "\n";
}

fs::path report_csv_path(const std::string& p) {
  return fs::is_directory(p) ? fs::path(p) / "report.csv" : fs::path(p);
}

struct EvaluateArgs {
  Common common;
  std::string report;
  std::string truth;
  std::vector<double> k{0.01, 0.1, 1.0};
};

void run_evaluate(EvaluateArgs& a, const json& config) {
  require_file(a.report, "report");
  const fs::path csv = report_csv_path(a.report);
  require_file(csv.string(), "report CSV");
  AnomalyReport report = read_report_csv(csv);
  if (!a.truth.empty()) {
    require_file(a.truth, "truth CSV");
    report.attach_truth(read_truth_csv(a.truth));
  }
  if (!report.has_truth) throw ValidationError("no ground truth: pass --truth or a report with truth tags");
  if (a.k.empty()) throw ConfigError("--k needs at least one value");
  const auto rows = evaluate_precision(report, a.k);

  OutputDir out(a.common.out);
  std::ofstream table(out.path("precision.csv"));
  table << "k_percent,labeled,tp,fp,precision,tp_signal_cut,tp_visual_artifact,tp_weather\n";
  json j = json::array();
  std::ostringstream pretty;
  pretty << "    K%  labeled    TP    FP  precision%\n";
  for (const auto& r : rows) {
    table << format_double(r.k_percent) << ',' << r.labeled << ',' << r.tp << ',' << r.fp << ','
          << format_double(r.precision) << ',' << r.by_kind[0] << ',' << r.by_kind[1] << ',' << r.by_kind[2] << '\n';
    j.push_back({{"k_percent", r.k_percent},
                 {"labeled", r.labeled},
                 {"tp", r.tp},
                 {"fp", r.fp},
                 {"precision", r.labeled == 0 ? json(nullptr) : json(r.precision)},
                 {"tp_by_kind", {{"signal_cut", r.by_kind[0]}, {"visual_artifact", r.by_kind[1]}, {"weather", r.by_kind[2]}}}});
    char line[96];
    std::snprintf(line, sizeof line, "%6.2f %8zu %5zu %5zu %10.1f\n", r.k_percent, r.labeled, r.tp, r.fp,
                  100.0 * r.precision);
    pretty << line;
  }
  table.close();
  write_json(out.path("evaluation.json"), json{{"total", report.rows.size()}, {"rows", j}});
  write_run_json(out, "evaluate", config);
  out.commit();
  std::cout << pretty.str();
}

struct PlotArgs {
  Common common;
  std::string report;
  std::string camera;
  std::string data;
};

void run_plot(PlotArgs& a, const json& config) {
  require_file(a.report, "report");
  const fs::path csv = report_csv_path(a.report);
  require_file(csv.string(), "report CSV");
  const AnomalyReport report = read_report_csv(csv);
  std::optional<PreparedDataset> data;
  if (!a.data.empty()) {
    require_file(a.data, "dataset directory");
    data = read_dataset(a.data);
  }
  std::size_t node = 0;
  std::map<std::int64_t, std::size_t> row_of;
  if (data) {
    const auto ids = data->station_order();
    auto it = std::find(ids.begin(), ids.end(), a.camera);
    if (it == ids.end()) throw ConfigError("camera '" + a.camera + "' is not in the dataset");
    node = static_cast<std::size_t>(it - ids.begin());
    for (std::size_t t = 0; t < data->num_times(); ++t) row_of[data->times[t].minutes] = t;
  }

  OutputDir out(a.common.out);
  std::ofstream f(out.path("camera_" + a.camera + ".csv"));
  f << "timestamp" << (data ? ",flow" : "") << ",s_g,s_d,score,labeled,truth_tag\n";
  std::size_t n = 0;
  for (const auto& r : report.rows) {
    if (r.camera_id != a.camera) continue;
    ++n;
    f << r.time.to_string();
    if (data) {
      auto it = row_of.find(r.time.minutes);
      f << ',' << (it == row_of.end() ? std::string() : format_double(data->X.at(it->second, node, 0)));
    }
    f << ',' << format_double(r.s_g) << ',' << format_double(r.s_d) << ',' << format_double(r.score) << ','
      << (r.labeled ? 1 : 0) << ',' << (report.has_truth ? (r.truth ? std::string(kind_name(*r.truth)) : "none") : "")
      << '\n';
  }
  f.close();
  if (n == 0) throw ConfigError("camera '" + a.camera + "' has no rows in the report");
  write_run_json(out, "plot-data", config);
  out.commit();
  std::cout << "wrote " << n << " rows for camera " << a.camera << "\n";
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Spatiotemporal GAN traffic anomaly detector"};
  app.require_subcommand(1);

  SimulateArgs sim;
  PreprocessArgs pre;
  TrainArgs tr;
  DetectArgs det;
  EvaluateArgs ev;
  PlotArgs plot;

  auto* s_sim = app.add_subcommand("simulate", "Generate synthetic flows, stations and anomaly truth");
  Options o_sim(s_sim);
  add_common(o_sim, sim.common);
  o_sim.add("cameras", sim.spec.n_cameras, "Number of cameras");
  o_sim.add("days", sim.spec.n_days, "Number of days");
  o_sim.add("start-date", sim.spec.start_date, "First simulated day (YYYY-MM-DD)");
  o_sim.add("noise", sim.spec.noise_std, "Per-minute noise std");
  o_sim.add("day-variation", sim.spec.day_variation, "Std of the per-day level factor");
  o_sim.add("camera-spread", sim.spec.camera_spread, "Per-camera amplitude scale half-range");
  o_sim.add("profile-length", sim.spec.profile_length, "Correlation length of camera profiles (m)");
  o_sim.add("missing-rate", sim.spec.missing_rate, "Probability of an isolated missing minute");
  o_sim.add("threshold", sim.spec.threshold, "Adjacency threshold (m) for weather neighbourhoods");
  o_sim.add("anomaly-rate", sim.spec.anomaly_rate, "Anomalous share of 5-minute points");
  o_sim.add("cut-share", sim.spec.signal_cut_share, "Relative share of signal cuts");
  o_sim.add("weather-share", sim.spec.weather_share, "Relative share of weather events");
  o_sim.add("artifact-share", sim.spec.visual_artifact_share, "Relative share of visual artifacts");
  o_sim.add("weather-depth", sim.spec.weather_depth, "Relative flow depression at a weather centre");
  o_sim.add("artifact-amplitude", sim.spec.artifact_amplitude, "Spike amplitude of visual artifacts");

  auto* s_pre = app.add_subcommand("preprocess", "Forward fill, 5-minute averaging, truncation and assembly");
  Options o_pre(s_pre);
  add_common(o_pre, pre.common);
  o_pre.add("flows", pre.flows, "Flow CSV (camera_id,timestamp,flow|count)");
  o_pre.add("stations", pre.stations, "Stations CSV (camera_id,lat,lon)");
  o_pre.add("capacities", pre.capacities, "Capacity CSV for count input (camera_id,capacity)");
  o_pre.add("edges", pre.edges, "Extra adjacency CSV (id_a,id_b)");
  o_pre.add("graph-threshold", pre.threshold, "Adjacency threshold in metres");
  o_pre.add("day-start", pre.day_start, "First kept clock time");
  o_pre.add("day-end", pre.day_end, "Last kept clock time");
  o_pre.add("from-day", pre.from_day, "First target day (ordinal)");
  o_pre.add("to-day", pre.to_day, "Last day (ordinal, -1 = last)");
  o_pre.add("context-days", pre.context_days, "History-only days kept before --from-day");

  auto* s_tr = app.add_subcommand("train", "Adversarial training");
  Options o_tr(s_tr);
  add_common(o_tr, tr.common);
  o_tr.add("data", tr.data, "Prepared dataset directory");
  o_tr.add("graph-threshold", tr.threshold, "Adjacency threshold in metres");
  o_tr.add("edges", tr.edges, "Extra adjacency CSV (id_a,id_b)");
  o_tr.add("epochs", tr.train.epochs, "Epochs");
  o_tr.add("batch", tr.train.batch, "Batch size");
  o_tr.add("lr-g", tr.train.lr_g, "Generator learning rate");
  o_tr.add("lr-d", tr.train.lr_d, "Discriminator learning rate");
  o_tr.add("lambda-g", tr.train.lambda_g, "Reconstruction weight");
  o_tr.add("hidden", tr.train.hidden, "Hidden width");
  o_tr.add("recent", tr.train.recent, "Recent window length (5-minute steps)");
  o_tr.add("trend", tr.train.trend, "Trend window length (days)");
  o_tr.add("chunk", tr.train.chunk, "Windows per gradient chunk");
  o_tr.flag("stitch-days", tr.stitch_days, "Let recent windows reach into the previous service day");

  auto* s_det = app.add_subcommand("detect", "Score a prepared test set and label the top K percent");
  Options o_det(s_det);
  add_common(o_det, det.common);
  o_det.add("data", det.data, "Prepared test dataset directory");
  o_det.add("ckpt", det.ckpt, "Checkpoint JSON");
  o_det.add("truth", det.truth, "Optional truth CSV to tag rows");
  o_det.add("k", det.k, "Top-K percent");
  o_det.add("lambda", det.lambda, "Weight on the discriminator score");
  o_det.flag("stitch-days", det.stitch_days, "Let recent windows reach into the previous service day");

  auto* s_ev = app.add_subcommand("evaluate", "Precision table against ground truth");
  Options o_ev(s_ev);
  add_common(o_ev, ev.common);
  o_ev.add("report", ev.report, "Report directory or CSV");
  o_ev.add("truth", ev.truth, "Truth CSV");
  o_ev.add("k", ev.k, "Comma-separated K percents")->delimiter(',');

  auto* s_plot = app.add_subcommand("plot-data", "Per-camera series behind an anomaly plot");
  Options o_plot(s_plot);
  add_common(o_plot, plot.common);
  o_plot.add("report", plot.report, "Report directory or CSV");
  o_plot.add("camera", plot.camera, "Camera id")->required();
  o_plot.add("data", plot.data, "Optional prepared dataset to include flow");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::vector<std::pair<CLI::App*, Options*>> subs{{s_sim, &o_sim}, {s_pre, &o_pre}, {s_tr, &o_tr},
                                                         {s_det, &o_det}, {s_ev, &o_ev},   {s_plot, &o_plot}};
  try {
    for (auto [sub, opts] : subs) {
      if (!sub->parsed()) continue;
      const std::string name = sub->get_name();
      const std::string* config_path = nullptr;
      for (const Common* c : {&sim.common, &pre.common, &tr.common, &det.common, &ev.common, &plot.common}) {
        if (!c->config.empty()) config_path = &c->config;
      }
      if (config_path) opts->apply_config(load_config(*config_path), name);
      const json config = opts->echo();
      if (name == "simulate") run_simulate(sim, config);
      if (name == "preprocess") run_preprocess(pre, config);
      if (name == "train") run_train(tr, config);
      if (name == "detect") run_detect(det, config);
      if (name == "evaluate") run_evaluate(ev, config);
      if (name == "plot-data") run_plot(plot, config);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace stgan::cli
