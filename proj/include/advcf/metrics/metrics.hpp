#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "advcf/synthworld/dataset.hpp"
#include "advcf/types.hpp"

namespace advcf::metrics {

/// Age bins over [edges.front(), edges.back()]. A boundary age belongs to the
/// higher bin, except the final edge, which belongs to the last bin.
struct AgeBins {
  std::vector<double> edges = {60.0, 70.0, 80.0, 90.0};

  std::size_t count() const { return edges.size() - 1; }
  std::size_t bin_of(double age) const;
  /// e.g. "60-70"
  std::string label(std::size_t bin) const;
};

struct GroupStats {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

/// AD is the positive class. Ratios with an empty denominator are 0.
struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision() const { return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
  double recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
  void add(bool predicted_ad, bool actual_ad);
};

struct MetricsReport {
  AgeBins bins;
  /// groups[bin][diagnosis]
  std::vector<std::array<GroupStats, 2>> groups;
  std::vector<Confusion> per_bin;
  Confusion overall;
  std::size_t correct = 0;
  std::size_t total = 0;

  double overall_accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  double group_accuracy(std::size_t bin, Diagnosis dx) const { return groups.at(bin)[static_cast<int>(dx)].accuracy(); }
  /// Minimum accuracy over non-empty groups.
  double worst_group_accuracy() const;
};

/// `predicted_ad[i]` is the thresholded prediction for `data[i]`.
MetricsReport group_metrics(std::span<const bool> predicted_ad, const world::Dataset& data, const AgeBins& bins = {});
MetricsReport group_metrics(const std::vector<bool>& predicted_ad, const world::Dataset& data, const AgeBins& bins = {});

/// Thresholds probabilities at 0.5 (p >= 0.5 means AD).
std::vector<bool> threshold(std::span<const double> probabilities);

struct Histogram {
  double lo = kMinAge;
  double width = 5.0;
  std::vector<std::size_t> counts;

  std::size_t total() const;
  double bin_lo(std::size_t i) const { return lo + width * static_cast<double>(i); }
};

/// Counts per bin of `width` years over [lo, hi]; hi falls in the last bin,
/// ages outside the range are clamped to the end bins.
Histogram age_histogram(std::span<const double> ages, double width, double lo = kMinAge, double hi = kMaxAge);

void to_json(nlohmann::json& j, const MetricsReport& r);

}  // namespace advcf::metrics
