#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "advcf/harness/io.hpp"

namespace advcf::harness {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Acceptance checks that apply to one experiment's results.json content.
/// The baselines kind has none (its conventional-augmentation comparison is
/// reported, not asserted).
std::vector<CriterionResult> check_criteria(const nlohmann::json& results);

/// Per-table row with the largest mean in each column; NaN cells are skipped
/// and single-row tables are ignored.
std::vector<std::pair<std::string, std::string>> best_per_column(const Table& t);

/// Plain-text summary of an output directory: mean +- std tables, the best
/// method per column and the criterion verdicts. Throws listing the expected
/// files when they are missing.
std::string report(const std::filesystem::path& dir, std::vector<CriterionResult>* criteria = nullptr);

}  // namespace advcf::harness
