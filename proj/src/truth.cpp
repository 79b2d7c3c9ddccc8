#include "stgan/truth.hpp"

#include <fstream>

#include "stgan/csv.hpp"
#include "stgan/errors.hpp"

namespace stgan {

std::string_view kind_name(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::SignalCut:
      return "signal_cut";
    case AnomalyKind::VisualArtifact:
      return "visual_artifact";
    case AnomalyKind::Weather:
      return "weather";
  }
  return "unknown";
}

AnomalyKind parse_kind(std::string_view text) {
  if (text == "signal_cut") return AnomalyKind::SignalCut;
  if (text == "visual_artifact") return AnomalyKind::VisualArtifact;
  if (text == "weather") return AnomalyKind::Weather;
  throw DataError("unknown anomaly kind '" + std::string(text) + "'");
}

void write_truth_csv(const std::filesystem::path& path, const std::vector<InjectionRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "camera_id,start,end,kind\n";
  for (const auto& r : records) {
    out << r.camera_id << ',' << r.start.to_string() << ',' << r.end.to_string() << ',' << kind_name(r.kind) << '\n';
  }
}

std::vector<InjectionRecord> read_truth_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const auto c_id = table.column("camera_id");
  const auto c_start = table.column("start");
  const auto c_end = table.column("end");
  const auto c_kind = table.column("kind");
  std::vector<InjectionRecord> out;
  for (const auto& row : table.rows) {
    InjectionRecord r{row[c_id], Timestamp::parse(row[c_start]), Timestamp::parse(row[c_end]), parse_kind(row[c_kind])};
    if (!(r.start < r.end)) throw DataError("truth record for camera '" + r.camera_id + "' has end <= start");
    out.push_back(std::move(r));
  }
  return out;
}

std::optional<AnomalyKind> truth_at(const std::vector<InjectionRecord>& records, std::string_view camera_id,
                                    Timestamp slot, int width_minutes) {
  const Timestamp slot_end = slot + width_minutes;
  for (const auto& r : records) {
    if (r.camera_id == camera_id && r.start < slot_end && slot < r.end) return r.kind;
  }
  return std::nullopt;
}

}  // namespace stgan
