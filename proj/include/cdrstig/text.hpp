#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cdrstig::text {

/// Splits on `sep` without allocation; fields view into `line`.
/// Returns the number of fields written to `out` (at most out.size()), or
/// out.size() + 1 if the line has more fields than `out` can hold.
std::size_t split(std::string_view line, char sep, std::span<std::string_view> out) noexcept;

std::vector<std::string_view> split(std::string_view line, char sep);

std::string_view trim(std::string_view s) noexcept;

/// Strips a trailing '\r' (CRLF input).
inline std::string_view chomp(std::string_view s) noexcept {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) noexcept;
bool parse_int(std::string_view s, std::int64_t& out) noexcept;

/// Shortest round-trip decimal representation; "nan", "inf", "-inf" for
/// non-finite values. Deterministic across runs.
std::string format_double(double v);

/// Line-oriented CSV output with deterministic number formatting.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);

  CsvWriter& field(std::string_view s);
  CsvWriter& field(double v);
  CsvWriter& field(std::int64_t v);
  CsvWriter& field(int v) { return field(static_cast<std::int64_t>(v)); }
  CsvWriter& field(std::size_t v) { return field(static_cast<std::int64_t>(v)); }
  void end_row();

  /// Writes a full header/data row.
  void row(std::initializer_list<std::string_view> fields);

  void close();
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  bool first_ = true;
};

/// Reads a whole file into memory; throws Error(Io) naming the path.
std::string read_file(const std::string& path);

}  // namespace cdrstig::text
