#include "advcf/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace advcf::metrics {

std::size_t AgeBins::bin_of(double age) const {
  if (edges.size() < 2) throw std::logic_error("age bins need at least two edges");
  const auto it = std::upper_bound(edges.begin(), edges.end(), age);
  if (it == edges.begin()) return 0;
  const auto idx = static_cast<std::size_t>(it - edges.begin()) - 1;
  return std::min(idx, count() - 1);
}

std::string AgeBins::label(std::size_t bin) const {
  std::ostringstream os;
  os << edges.at(bin) << '-' << edges.at(bin + 1);
  return os.str();
}

void Confusion::add(bool predicted_ad, bool actual_ad) {
  if (predicted_ad && actual_ad) ++tp;
  else if (predicted_ad) ++fp;
  else if (actual_ad) ++fn;
  else ++tn;
}

double MetricsReport::worst_group_accuracy() const {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& bin : groups) {
    for (const GroupStats& g : bin) {
      if (g.total) worst = std::min(worst, g.accuracy());
    }
  }
  return std::isinf(worst) ? 0.0 : worst;
}

MetricsReport group_metrics(const std::vector<bool>& predicted_ad, const world::Dataset& data, const AgeBins& bins) {
  // std::vector<bool> has no contiguous storage; copy into a plain buffer.
  const std::unique_ptr<bool[]> flags(new bool[predicted_ad.size()]);
  for (std::size_t i = 0; i < predicted_ad.size(); ++i) flags[i] = predicted_ad[i];
  return group_metrics(std::span<const bool>(flags.get(), predicted_ad.size()), data, bins);
}

MetricsReport group_metrics(std::span<const bool> predicted_ad, const world::Dataset& data, const AgeBins& bins) {
  if (predicted_ad.size() != data.size()) {
    throw std::invalid_argument("group_metrics: " + std::to_string(predicted_ad.size()) + " predictions for " +
                                std::to_string(data.size()) + " samples");
  }
  MetricsReport r;
  r.bins = bins;
  r.groups.assign(bins.count(), {});
  r.per_bin.assign(bins.count(), {});
  for (std::size_t i = 0; i < data.size(); ++i) {
    const world::SynthSample& s = data[i];
    const bool actual = s.diagnosis == Diagnosis::AD;
    const bool hit = predicted_ad[i] == actual;
    const std::size_t b = bins.bin_of(s.chron_age);
    GroupStats& g = r.groups[b][static_cast<int>(s.diagnosis)];
    ++g.total;
    g.correct += hit;
    r.per_bin[b].add(predicted_ad[i], actual);
    r.overall.add(predicted_ad[i], actual);
    ++r.total;
    r.correct += hit;
  }
  return r;
}

std::vector<bool> threshold(std::span<const double> probabilities) {
  std::vector<bool> out(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i) out[i] = probabilities[i] >= 0.5;
  return out;
}

std::size_t Histogram::total() const {
  std::size_t n = 0;
  for (std::size_t c : counts) n += c;
  return n;
}

Histogram age_histogram(std::span<const double> ages, double width, double lo, double hi) {
  if (!(width > 0.0) || !(hi > lo)) throw std::invalid_argument("histogram needs width > 0 and hi > lo");
  Histogram h;
  h.lo = lo;
  h.width = width;
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / width - 1e-12));
  h.counts.assign(std::max<std::size_t>(n, 1), 0);
  for (double a : ages) {
    const double pos = std::floor((a - lo) / width);
    const auto idx = pos < 0 ? std::size_t{0} : std::min(static_cast<std::size_t>(pos), h.counts.size() - 1);
    ++h.counts[idx];
  }
  return h;
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j["bin_edges"] = r.bins.edges;
  j["overall_accuracy"] = r.overall_accuracy();
  j["worst_group_accuracy"] = r.worst_group_accuracy();
  j["correct"] = r.correct;
  j["total"] = r.total;
  auto& groups = j["groups"] = nlohmann::json::array();
  for (std::size_t b = 0; b < r.groups.size(); ++b) {
    for (int dx = 0; dx < 2; ++dx) {
      const GroupStats& g = r.groups[b][dx];
      groups.push_back({{"bin", r.bins.label(b)},
                        {"diagnosis", std::string(diagnosis_name(static_cast<Diagnosis>(dx)))},
                        {"correct", g.correct},
                        {"total", g.total},
                        {"accuracy", g.accuracy()}});
    }
  }
  auto& pr = j["precision_recall"] = nlohmann::json::array();
  for (std::size_t b = 0; b < r.per_bin.size(); ++b) {
    const Confusion& c = r.per_bin[b];
    pr.push_back({{"bin", r.bins.label(b)},
                  {"precision", c.precision()},
                  {"recall", c.recall()},
                  {"tp", c.tp},
                  {"fp", c.fp},
                  {"tn", c.tn},
                  {"fn", c.fn}});
  }
  j["overall_precision"] = r.overall.precision();
  j["overall_recall"] = r.overall.recall();
}

}  // namespace advcf::metrics
