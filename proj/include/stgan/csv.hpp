#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stgan {

// Minimal comma-separated reader: no quoting, '.' decimals, UTF-8 passthrough.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws DataError naming the file's header otherwise.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

std::vector<std::string> split_csv_line(std::string_view line);

CsvTable read_csv(const std::filesystem::path& path);

double parse_double(std::string_view text, std::string_view what);

// Shortest representation that round-trips exactly.
std::string format_double(double v);

}  // namespace stgan
