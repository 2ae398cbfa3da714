#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "advcf/metrics/metrics.hpp"

namespace advcf::harness {

/// Writes to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// Rows are methods, columns are named; NaN marks a cell that does not apply.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::string> rows;
  std::vector<std::vector<double>> values;

  void add_row(std::string row, std::vector<double> v);
  /// Index of a row or column; throws if absent.
  std::size_t row(std::string_view name) const;
  std::size_t column(std::string_view name) const;
  double at(std::string_view row_name, std::string_view column_name) const;
};

void to_json(nlohmann::json& j, const Table& t);
void from_json(const nlohmann::json& j, Table& t);

/// Header row, then one row per method; values with `decimals` places and
/// "N/A" for NaN.
std::string to_csv(const Table& t, int decimals = 1);

/// Cell-wise mean and sample standard deviation over per-seed tables of the
/// same layout. A cell that is NaN in any seed stays NaN.
Table table_mean(const std::vector<Table>& tables);
Table table_std(const std::vector<Table>& tables);

/// Overlaid bar histograms of two age sets ("before" and "after").
std::string histogram_svg(const metrics::Histogram& before, const metrics::Histogram& after, std::string_view title);

}  // namespace advcf::harness
