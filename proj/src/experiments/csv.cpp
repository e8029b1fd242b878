#include "ablo/experiments/csv.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>

#include "ablo/types.hpp"

namespace ablo::experiments {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string format_cell(const Cell& c) {
  struct V {
    std::string operator()(double x) const { return format_double(x); }
    std::string operator()(std::int64_t x) const { return std::to_string(x); }
    std::string operator()(std::uint64_t x) const { return std::to_string(x); }
    std::string operator()(const std::string& s) const { return s; }
  };
  return std::visit(V{}, c);
}

CsvWriter::CsvWriter(const std::string& path, std::vector<std::string> header)
    : path_(path), columns_(header.size()) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw ConfigError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::row(const std::vector<Cell>& cells) {
  if (cells.size() != columns_)
    throw ConfigError(path_ + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(columns_));
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << format_cell(cells[i]);
  out_ << '\n';
  ++rows_;
}

}  // namespace ablo::experiments
