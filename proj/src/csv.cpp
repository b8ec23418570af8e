// SPDX-License-Identifier: Apache-2.0
#include "m2g2/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include "m2g2/errors.hpp"

namespace m2g2::csv {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw DataError("CSV is missing required column '" + std::string(name) + "'");
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.emplace_back(trim(field));
  return out;
}

Table parse(std::istream& in, const std::string& context) {
  Table t;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (!have_header) {
      if (!fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw DataError(context + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw DataError(context + ": empty file");
  return t;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse(in, path.string());
}

double to_double(std::string_view field, std::string_view context) {
  field = trim(field);
  double v = 0.0;
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw DataError(std::string(context) + ": not a number: '" + std::string(field) + "'");
  }
  return v;
}

std::string format(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_matrix(const std::filesystem::path& path, const Tensor& m,
                  const std::vector<std::string>& labels) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const bool labeled = labels.size() == m.rows() && labels.size() == m.cols();
  if (labeled) {
    out << "node";
    for (const auto& l : labels) out << ',' << l;
    out << '\n';
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (labeled) out << labels[i] << ',';
    for (std::size_t j = 0; j < m.cols(); ++j) out << format(m(i, j)) << (j + 1 == m.cols() ? "" : ",");
    out << '\n';
  }
}

}  // namespace m2g2::csv
