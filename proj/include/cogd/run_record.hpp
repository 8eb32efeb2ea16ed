#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace cogd {

/// Per-run trace persisted as a sectioned CSV: a format tag line, then
/// "config" key/value lines (config echo, seed, version), a "columns" line,
/// one "row" line per iteration, and "summary" key/value lines. Every line
/// is padded to the same width so the file is plain RFC-4180 with quoted
/// text cells and LF endings. Files are written atomically (temp + rename).
class RunRecord {
 public:
  void set_header(const std::string& key, const std::string& value);
  void set_columns(std::vector<std::string> columns);
  void add_row(std::vector<double> row);  ///< throws on width mismatch
  void set_summary(const std::string& key, double value);

  const std::vector<std::pair<std::string, std::string>>& header() const {
    return header_;
  }
  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  const std::vector<std::pair<std::string, double>>& summary() const {
    return summary_;
  }

  std::string header_value(const std::string& key) const;
  double summary_value(const std::string& key) const;
  int column_index(const std::string& name) const;  ///< -1 when absent

  void write_csv(const std::filesystem::path& path) const;
  static RunRecord read_csv(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> header_;
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
  std::vector<std::pair<std::string, double>> summary_;
};

/// Shortest decimal form that round-trips the double exactly.
std::string format_double(double value);

/// Atomic small-file write used for every artifact the harness emits.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);

}  // namespace cogd
