#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stgan/model.hpp"

namespace stgan {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointHeader {
  int format_version = kCheckpointFormatVersion;
  ModelDims dims;
  std::vector<std::string> station_order;
  nlohmann::json graph_config = nlohmann::json::object();  // threshold, sigma
};

struct Checkpoint {
  CheckpointHeader header;
  Generator generator;
  Discriminator discriminator;
};

// {"header": {...}, "parameters": {name: {"shape": [...], "data": [...]}}}
nlohmann::json checkpoint_to_json(const CheckpointHeader& header, const Generator& gen, const Discriminator& disc);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, const Generator& gen,
                     const Discriminator& disc);
// Throws ValidationError on a malformed document or any shape mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws ValidationError unless the checkpoint was trained on this exact station order.
void validate_station_order(const CheckpointHeader& header, const std::vector<std::string>& station_order);

}  // namespace stgan
