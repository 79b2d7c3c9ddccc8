#include "stgan/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "stgan/errors.hpp"

namespace stgan {

using nlohmann::json;

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return __builtin_bswap64(v);
  }
}

Shape shape_from_json(const json& j) {
  Shape s;
  for (const auto& d : j) s.push_back(d.get<std::size_t>());
  return s;
}

}  // namespace

void write_f64_file(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  std::vector<std::uint64_t> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &values[i], sizeof bits);
    buf[i] = to_little(bits);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(std::uint64_t)));
}

std::vector<double> read_f64_file(const std::filesystem::path& path, std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected_count * sizeof(double)) {
    throw DataError(path.string() + ": expected " + std::to_string(expected_count) + " float64 values, found " +
                    std::to_string(bytes) + " bytes");
  }
  in.seekg(0);
  std::vector<std::uint64_t> buf(expected_count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  std::vector<double> out(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    const std::uint64_t bits = to_little(buf[i]);
    std::memcpy(&out[i], &bits, sizeof bits);
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const PreparedDataset& data, const json& config_echo) {
  std::filesystem::create_directories(dir);
  json meta;
  meta["format_version"] = kDatasetFormatVersion;
  meta["dtype"] = "float64-le";
  meta["station_order"] = data.station_order();
  json stations = json::array();
  for (const auto& s : data.stations) stations.push_back({{"id", s.id}, {"lat", s.latitude}, {"lon", s.longitude}});
  meta["stations"] = stations;
  json times = json::array();
  for (const auto& t : data.times) times.push_back(t.to_string());
  meta["times"] = times;
  meta["day_boundaries"] = data.day_boundaries;
  meta["context_days"] = data.context_days;
  meta["pipeline"] = {{"day_start", format_clock(data.pipeline.day_start)}, {"day_end", format_clock(data.pipeline.day_end)}};
  meta["arrays"] = {{"X", {{"file", "X.f64"}, {"shape", data.X.shape()}}},
                    {"E_all", {{"file", "E_all.f64"}, {"shape", data.E_all.shape()}}}};
  meta["config"] = config_echo;

  write_f64_file(dir / "X.f64", data.X.data());
  write_f64_file(dir / "E_all.f64", data.E_all.data());
  std::ofstream out(dir / "meta.json");
  if (!out) throw DataError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

PreparedDataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw DataError("no meta.json in " + dir.string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed " + (dir / "meta.json").string() + ": " + e.what());
  }
  try {
    if (meta.at("format_version").get<int>() != kDatasetFormatVersion) {
      throw DataError("unsupported dataset format_version in " + dir.string());
    }
    PreparedDataset data;
    for (const auto& s : meta.at("stations")) {
      data.stations.push_back(Station{s.at("id").get<std::string>(), s.at("lat").get<double>(), s.at("lon").get<double>()});
    }
    for (const auto& t : meta.at("times")) data.times.push_back(Timestamp::parse(t.get<std::string>()));
    data.day_boundaries = meta.at("day_boundaries").get<std::vector<std::size_t>>();
    data.context_days = meta.at("context_days").get<std::size_t>();
    data.pipeline.day_start = parse_clock(meta.at("pipeline").at("day_start").get<std::string>());
    data.pipeline.day_end = parse_clock(meta.at("pipeline").at("day_end").get<std::string>());

    const auto& arrays = meta.at("arrays");
    const Shape xs = shape_from_json(arrays.at("X").at("shape"));
    const Shape es = shape_from_json(arrays.at("E_all").at("shape"));
    if (xs.size() != 3 || xs[0] != data.times.size() || xs[1] != data.stations.size()) {
      throw DataError("X shape " + shape_string(xs) + " inconsistent with meta.json times/stations");
    }
    if (es.size() != 2 || es[0] != data.times.size() || es[1] != kTimeFeatureSize) {
      throw DataError("E_all shape " + shape_string(es) + " inconsistent with meta.json");
    }
    data.X = Tensor(xs, read_f64_file(dir / arrays.at("X").at("file").get<std::string>(), shape_size(xs)));
    data.E_all = Tensor(es, read_f64_file(dir / arrays.at("E_all").at("file").get<std::string>(), shape_size(es)));
    if (!data.X.all_finite()) throw DataError("X contains non-finite values");
    return data;
  } catch (const json::exception& e) {
    throw DataError("malformed " + (dir / "meta.json").string() + ": " + e.what());
  }
}

}  // namespace stgan
