#pragma once

/// \file io.hpp
/// \brief Number formatting and file output shared by the writers.

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "reslab/error.hpp"

namespace reslab {

/// Shortest representation that parses back to the same double.
inline std::string format_shortest(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// 17 significant digits.
inline std::string format17(double v) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return std::string(buf.data());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    require(!ec, ErrorCode::IoError, "cannot create directory " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Little-endian byte buffer.
class LeWriter {
 public:
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  const std::vector<char>& bytes() const noexcept { return bytes_; }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
  }

 private:
  std::vector<char> bytes_;
};

inline std::uint64_t read_le_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

inline double read_le_f64(const char* p) { return std::bit_cast<double>(read_le_u64(p)); }

/// Table with a header row; cells use the shortest round-trip form.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add_row(const std::vector<double>& row) {
    require(row.size() == columns_.size(), ErrorCode::InvalidArgument, "csv row width mismatch");
    rows_.push_back(row);
  }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) out += ',';
      out += columns_[i];
    }
    out += '\n';
    for (const auto& row : rows_) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += format_shortest(row[i]);
      }
      out += '\n';
    }
    return out;
  }

  std::size_t rows() const noexcept { return rows_.size(); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

}  // namespace reslab
