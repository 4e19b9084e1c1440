#include "rbrl/csv.hpp"

#include "rbrl/text.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rbrl {

int CsvTable::column_index(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<double> CsvTable::column(const std::string& name) const {
  int idx = column_index(name);
  if (idx < 0) throw std::runtime_error("csv: no column named '" + name + "'");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[idx]);
  return out;
}

void CsvTable::append_row(const std::vector<double>& row) {
  if (row.size() != columns.size()) throw std::runtime_error("csv: row width mismatch");
  rows.push_back(row);
}

std::string CsvTable::to_string() const {
  std::ostringstream os;
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i) os << ',';
    os << columns[i];
  }
  os << '\n';
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) {
      if (i) os << ',';
      os << format_double(r[i]);
    }
    os << '\n';
  }
  return os.str();
}

void CsvTable::write(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("csv: cannot open for writing: " + path);
  f << to_string();
}

CsvTable CsvTable::from_string(const std::string& text) {
  CsvTable t;
  bool header_done = false;
  for (const auto& line : split_lines(text)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    cells.push_back(cur);
    if (!header_done) {
      for (auto& c : cells) t.columns.push_back(trim(c));
      header_done = true;
      continue;
    }
    std::vector<double> row;
    for (auto& c : cells) {
      std::string v = trim(c);
      if (v.empty() || to_lower(v) == "nan") {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        row.push_back(std::stod(v));
      }
    }
    if (row.size() != t.columns.size()) throw std::runtime_error("csv: ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable CsvTable::read(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("csv: cannot open file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_string(ss.str());
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns)
    : columns_(columns) {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("csv: cannot open for writing: " + path);
  file_ = f;
  std::string header;
  for (size_t i = 0; i < columns_.size(); ++i) {
    if (i) header += ',';
    header += columns_[i];
  }
  header += '\n';
  std::fwrite(header.data(), 1, header.size(), f);
  std::fflush(f);
}

CsvWriter::~CsvWriter() {
  if (file_) std::fclose(static_cast<FILE*>(file_));
}

void CsvWriter::write_row(const std::vector<double>& row) {
  if (row.size() != columns_.size()) throw std::runtime_error("csv: row width mismatch");
  std::string line;
  for (size_t i = 0; i < row.size(); ++i) {
    if (i) line += ',';
    line += format_double(row[i]);
  }
  line += '\n';
  std::fwrite(line.data(), 1, line.size(), static_cast<FILE*>(file_));
  std::fflush(static_cast<FILE*>(file_));
}

}  // namespace rbrl
