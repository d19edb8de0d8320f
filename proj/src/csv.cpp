#include "pagnet/csv.hpp"

#include <cstdio>
#include <sstream>

#include "pagnet/error.hpp"

namespace pagnet {

namespace {
std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string join(const std::vector<std::string>& fields) {
  std::string s;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) s += ',';
    s += fields[i];
  }
  return s;
}
}  // namespace

size_t CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw InputError("missing column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path + "' is empty");
  t.header = split(line);
  for (size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != t.header.size())
      throw InputError("'" + path + "' line " + std::to_string(lineno) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << join(table.header) << '\n';
  for (const auto& r : table.rows) out << join(r) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), width_(header.size()), out_(path, std::ios::trunc) {
  if (!out_) throw IoError("cannot open '" + path + "' for writing");
  out_ << join(header) << '\n' << std::flush;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) throw UsageError("csv row width mismatch for '" + path_ + "'");
  out_ << join(fields) << '\n' << std::flush;
  if (!out_) throw IoError("write failed for '" + path_ + "'");
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace pagnet
