#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stgan/timestamp.hpp"

namespace stgan {

enum class AnomalyKind { SignalCut, VisualArtifact, Weather };

std::string_view kind_name(AnomalyKind kind);
AnomalyKind parse_kind(std::string_view text);  // DataError on an unknown name

/// One injected anomaly on one camera over the half-open interval [start, end).
struct InjectionRecord {
  std::string camera_id;
  Timestamp start;
  Timestamp end;
  AnomalyKind kind = AnomalyKind::SignalCut;

  friend bool operator==(const InjectionRecord&, const InjectionRecord&) = default;
};

// truth.csv: camera_id,start,end,kind
void write_truth_csv(const std::filesystem::path& path, const std::vector<InjectionRecord>& records);
std::vector<InjectionRecord> read_truth_csv(const std::filesystem::path& path);

// Kind of the first record on `camera_id` overlapping [slot, slot + width).
std::optional<AnomalyKind> truth_at(const std::vector<InjectionRecord>& records, std::string_view camera_id,
                                    Timestamp slot, int width_minutes = 5);

}  // namespace stgan
