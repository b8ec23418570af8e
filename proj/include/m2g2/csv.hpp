// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "m2g2/tensor.hpp"

namespace m2g2::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws DataError naming the file context if absent.
  std::size_t column(std::string_view name) const;
};

/// Splits one line on commas. Double-quoted fields may contain commas.
std::vector<std::string> split_line(std::string_view line);

/// Reads a headered CSV. Blank lines are skipped; every row must have the
/// header's field count.
Table read(const std::filesystem::path& path);
Table parse(std::istream& in, const std::string& context);

double to_double(std::string_view field, std::string_view context);

/// Shortest decimal that round-trips to the same double.
std::string format(double v);

void write_matrix(const std::filesystem::path& path, const Tensor& m,
                  const std::vector<std::string>& labels = {});

}  // namespace m2g2::csv
