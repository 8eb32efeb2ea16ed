#include "cogd/run_record.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cogd/errors.hpp"

namespace cogd {

namespace {

constexpr const char* kFormatTag = "cogd-runrecord";
constexpr const char* kFormatVersion = "1";

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

double parse_double(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str())
    throw IoError("RunRecord: bad number '" + s + "' in " + context);
  return v;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(),
              static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename to " + path.string() + ": " + ec.message());
}

void RunRecord::set_header(const std::string& key, const std::string& value) {
  for (auto& kv : header_) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  header_.emplace_back(key, value);
}

void RunRecord::set_columns(std::vector<std::string> columns) {
  if (!rows_.empty() && columns.size() != columns_.size())
    throw InvalidInput("RunRecord: cannot change column count after rows");
  for (const auto& name : columns) {
    if (name.empty())
      throw InvalidInput("RunRecord: column names must not be empty");
  }
  columns_ = std::move(columns);
}

void RunRecord::add_row(std::vector<double> row) {
  if (row.size() != columns_.size())
    throw InvalidInput("RunRecord: row width " + std::to_string(row.size()) +
                       " does not match " + std::to_string(columns_.size()) +
                       " columns");
  rows_.push_back(std::move(row));
}

void RunRecord::set_summary(const std::string& key, double value) {
  for (auto& kv : summary_) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  summary_.emplace_back(key, value);
}

std::string RunRecord::header_value(const std::string& key) const {
  for (const auto& kv : header_)
    if (kv.first == key) return kv.second;
  throw InvalidInput("RunRecord: no header key '" + key + "'");
}

double RunRecord::summary_value(const std::string& key) const {
  for (const auto& kv : summary_)
    if (kv.first == key) return kv.second;
  throw InvalidInput("RunRecord: no summary key '" + key + "'");
}

int RunRecord::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i] == name) return static_cast<int>(i);
  return -1;
}

void RunRecord::write_csv(const std::filesystem::path& path) const {
  std::size_t width = 2;
  width = std::max(width, columns_.size() + 1);
  if (!header_.empty()) width = std::max<std::size_t>(width, 3);
  if (!summary_.empty()) width = std::max<std::size_t>(width, 3);

  std::ostringstream out;
  auto emit = [&](std::vector<std::string> cells) {
    while (cells.size() < width) cells.emplace_back("\"\"");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };

  emit({quote(kFormatTag), quote(kFormatVersion)});
  for (const auto& kv : header_)
    emit({quote("config"), quote(kv.first), quote(kv.second)});
  {
    std::vector<std::string> cells{quote("columns")};
    for (const auto& c : columns_) cells.push_back(quote(c));
    emit(std::move(cells));
  }
  for (const auto& row : rows_) {
    std::vector<std::string> cells{quote("row")};
    for (double v : row) cells.push_back(quote(format_double(v)));
    emit(std::move(cells));
  }
  for (const auto& kv : summary_)
    emit({quote("summary"), quote(kv.first), quote(format_double(kv.second))});

  write_file_atomic(path, out.str());
}

RunRecord RunRecord::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  RunRecord rec;
  std::string line;
  bool tagged = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.empty()) continue;
    const std::string& kind = cells[0];
    // Lines are padded with empty cells to a uniform width; each section
    // knows how many cells carry data.
    if (kind == kFormatTag) {
      tagged = true;
    } else if (kind == "config") {
      if (cells.size() < 3) throw IoError("RunRecord: bad config line");
      rec.set_header(cells[1], cells[2]);
    } else if (kind == "columns") {
      std::size_t end = cells.size();
      while (end > 1 && cells[end - 1].empty()) --end;
      rec.columns_.assign(cells.begin() + 1, cells.begin() +
                          static_cast<std::ptrdiff_t>(end));
    } else if (kind == "row") {
      const std::size_t width = rec.columns_.size();
      if (cells.size() < width + 1)
        throw IoError("RunRecord: row width mismatch in " + path.string());
      std::vector<double> row;
      row.reserve(width);
      for (std::size_t i = 1; i <= width; ++i)
        row.push_back(parse_double(cells[i], "row"));
      rec.rows_.push_back(std::move(row));
    } else if (kind == "summary") {
      if (cells.size() < 3) throw IoError("RunRecord: bad summary line");
      rec.set_summary(cells[1], parse_double(cells[2], "summary"));
    } else {
      throw IoError("RunRecord: unknown section '" + kind + "' in " +
                    path.string());
    }
  }
  if (!tagged)
    throw IoError("RunRecord: missing format tag in " + path.string());
  return rec;
}

}  // namespace cogd
