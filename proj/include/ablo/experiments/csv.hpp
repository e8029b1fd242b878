#pragma once

// Minimal CSV writer. Doubles use shortest round-trip decimal (std::to_chars), so
// output is locale independent and bit-exact on re-read.

#include <cstdint>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

namespace ablo::experiments {

using Cell = std::variant<double, std::int64_t, std::uint64_t, std::string>;

std::string format_double(double x);
std::string format_cell(const Cell& c);

class CsvWriter {
 public:
  /// Opens `path` (parent directories are created) and writes the header.
  CsvWriter(const std::string& path, std::vector<std::string> header);

  /// Throws ConfigError if the cell count differs from the header.
  void row(const std::vector<Cell>& cells);
  std::size_t rows_written() const { return rows_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::size_t columns_;
  std::size_t rows_ = 0;
  std::ofstream out_;
};

/// Helpers so call sites can write `cell(k)` for any integer type.
inline Cell cell(double x) { return x; }
inline Cell cell(std::size_t x) { return static_cast<std::uint64_t>(x); }
inline Cell cell(int x) { return static_cast<std::int64_t>(x); }
inline Cell cell(std::string s) { return s; }

}  // namespace ablo::experiments
