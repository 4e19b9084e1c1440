#pragma once

#include <string>
#include <vector>

namespace rbrl {

// Numeric CSV table with a header row. All cells are doubles; empty cells and
// the literal "nan" read back as NaN. Doubles are written round-trippably.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const;  // -1 when absent
  std::vector<double> column(const std::string& name) const;
  void append_row(const std::vector<double>& row);
  void write(const std::string& path) const;
  std::string to_string() const;

  static CsvTable read(const std::string& path);
  static CsvTable from_string(const std::string& text);
};

// Incremental writer used by training loops: opens the file once, writes the
// header, then flushes one row per call so partial runs remain readable.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);
  ~CsvWriter();
  void write_row(const std::vector<double>& row);
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
  void* file_;  // FILE*
};

}  // namespace rbrl
