#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "stgan/preprocess.hpp"

namespace stgan {

inline constexpr int kDatasetFormatVersion = 1;

// Directory layout: meta.json plus X.f64 and E_all.f64, raw little-endian
// float64 arrays whose shapes are declared in meta.json. `config_echo` is
// stored verbatim under "config".
void write_dataset(const std::filesystem::path& dir, const PreparedDataset& data,
                   const nlohmann::json& config_echo = nlohmann::json::object());
PreparedDataset read_dataset(const std::filesystem::path& dir);

void write_f64_file(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64_file(const std::filesystem::path& path, std::size_t expected_count);

}  // namespace stgan
