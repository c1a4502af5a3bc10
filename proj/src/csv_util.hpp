#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ivan::csv {

struct Table {
  std::vector<std::vector<std::string>> rows;  // comment lines already stripped
  std::vector<std::string> comments;           // leading-'#' lines, in order
};

/// Reads a comma-separated file. Lines starting with '#' are collected as
/// comments, not data. No quoting; fields are trimmed of surrounding spaces.
Table read_csv(const std::filesystem::path& path);

/// Strict double parse of a full field; throws with file/row/column context.
double parse_double(std::string_view field, const std::filesystem::path& path,
                    std::size_t row, std::size_t col);

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

uint64_t fnv1a64(std::string_view data);
std::string hex64(uint64_t value);

}  // namespace ivan::csv
