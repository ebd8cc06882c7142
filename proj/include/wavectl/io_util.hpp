#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace wavectl::io {

/// Flat little-endian float32 files.
void write_f32(const std::filesystem::path& path, std::span<const float> values);
void write_f32(const std::filesystem::path& path, std::span<const double> values);
std::vector<float> read_f32(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Creates the directory (and parents); throws IoError on failure.
void ensure_dir(const std::filesystem::path& dir);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Shortest round-tripping decimal text for a double.
std::string format_number(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& row(const std::vector<std::string>& cells);
  CsvWriter& row(std::span<const double> values);
  std::string str() const { return text_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::string text_;
};

}  // namespace wavectl::io
