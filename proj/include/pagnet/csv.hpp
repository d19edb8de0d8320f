#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace pagnet {

// Plain comma-separated tables; fields never contain commas or quotes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws InputError naming the missing column.
  size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

// Appends rows as they are produced and flushes each one.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);

 private:
  std::string path_;
  size_t width_;
  std::ofstream out_;
};

std::string format_number(double v);

}  // namespace pagnet
