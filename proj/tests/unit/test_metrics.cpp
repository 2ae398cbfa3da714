#include <gtest/gtest.h>

#include <algorithm>

#include "advcf/metrics/metrics.hpp"
#include "advcf/random.hpp"

using namespace advcf;
using namespace advcf::metrics;

namespace {

world::Dataset labelled(std::initializer_list<std::pair<double, Diagnosis>> items) {
  world::Dataset d;
  std::uint64_t id = 0;
  for (const auto& [age, dx] : items) {
    world::SynthSample s;
    s.id = id++;
    s.chron_age = age;
    s.diagnosis = dx;
    d.push_back(s);
  }
  return d;
}

world::Dataset random_dataset(std::size_t n, Rng& rng) {
  world::Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    world::SynthSample s;
    s.id = i;
    s.chron_age = rng.uniform(60.0, 90.0);
    s.diagnosis = rng.uniform() < 0.5 ? Diagnosis::AD : Diagnosis::CN;
    d.push_back(s);
  }
  return d;
}

}  // namespace

TEST(Metrics, AllCorrect) {
  Rng rng(1);
  const world::Dataset d = random_dataset(300, rng);
  std::vector<bool> pred;
  for (const auto& s : d) pred.push_back(s.diagnosis == Diagnosis::AD);
  const MetricsReport r = group_metrics(pred, d);
  EXPECT_EQ(r.overall_accuracy(), 1.0);
  EXPECT_EQ(r.worst_group_accuracy(), 1.0);
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(r.group_accuracy(b, Diagnosis::CN), 1.0);
    EXPECT_EQ(r.group_accuracy(b, Diagnosis::AD), 1.0);
  }
  EXPECT_EQ(r.overall.precision(), 1.0);
  EXPECT_EQ(r.overall.recall(), 1.0);
}

TEST(Metrics, PrecisionRecallFormula) {
  Confusion c;
  c.tp = 3;
  c.fp = 1;
  c.fn = 1;
  EXPECT_DOUBLE_EQ(c.precision(), 0.75);
  EXPECT_DOUBLE_EQ(c.recall(), 0.75);
  EXPECT_EQ(Confusion{}.precision(), 0.0);
  EXPECT_EQ(Confusion{}.recall(), 0.0);
}

TEST(Metrics, HandCountedReport) {
  // 65 CN right, 65 AD wrong, 75 AD right, 85 CN wrong (predicted AD).
  const auto d = labelled({{65, Diagnosis::CN}, {65, Diagnosis::AD}, {75, Diagnosis::AD}, {85, Diagnosis::CN}});
  const std::vector<bool> pred{false, false, true, true};
  const MetricsReport r = group_metrics(pred, d);
  EXPECT_EQ(r.correct, 2u);
  EXPECT_EQ(r.overall.tp, 1u);
  EXPECT_EQ(r.overall.fp, 1u);
  EXPECT_EQ(r.overall.fn, 1u);
  EXPECT_EQ(r.overall.tn, 1u);
  EXPECT_EQ(r.group_accuracy(0, Diagnosis::AD), 0.0);
  EXPECT_EQ(r.group_accuracy(1, Diagnosis::AD), 1.0);
  // Empty groups (70-80 CN, 80-90 AD) do not count towards the minimum.
  EXPECT_EQ(r.worst_group_accuracy(), 0.0);
  EXPECT_EQ(r.groups[1][0].total, 0u);
}

TEST(Metrics, LengthMismatchThrows) {
  const auto d = labelled({{65, Diagnosis::CN}});
  EXPECT_THROW(group_metrics(std::vector<bool>{true, false}, d), std::invalid_argument);
}

TEST(Metrics, DecompositionAndCountingOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const world::Dataset d = random_dataset(1 + rng.index(200), rng);
    std::vector<bool> pred;
    for (std::size_t i = 0; i < d.size(); ++i) pred.push_back(rng.uniform() < 0.5);
    const MetricsReport r = group_metrics(pred, d);

    std::size_t group_correct = 0, group_total = 0;
    for (const auto& g : r.groups) {
      for (const auto& s : g) {
        group_correct += s.correct;
        group_total += s.total;
      }
    }
    EXPECT_EQ(group_correct, r.correct);
    EXPECT_EQ(group_total, d.size());

    std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const bool ad = d[i].diagnosis == Diagnosis::AD;
      tp += pred[i] && ad;
      fp += pred[i] && !ad;
      fn += !pred[i] && ad;
      correct += pred[i] == ad;
    }
    EXPECT_EQ(r.correct, correct);
    const double prec = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double rec = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    EXPECT_EQ(r.overall.precision(), prec);
    EXPECT_EQ(r.overall.recall(), rec);

    double worst = 1.0;
    for (const auto& g : r.groups) {
      for (const auto& s : g) {
        if (s.total) worst = std::min(worst, s.accuracy());
      }
    }
    EXPECT_EQ(r.worst_group_accuracy(), worst);
  }
}

TEST(Metrics, BoundaryBins) {
  const AgeBins bins;
  EXPECT_EQ(bins.bin_of(60.0), 0u);
  EXPECT_EQ(bins.bin_of(69.999), 0u);
  EXPECT_EQ(bins.bin_of(70.0), 1u);
  EXPECT_EQ(bins.bin_of(80.0), 2u);
  EXPECT_EQ(bins.bin_of(90.0), 2u);
  EXPECT_EQ(bins.label(1), "70-80");
  // Ages past either end fall into the end bins.
  EXPECT_EQ(bins.bin_of(90.5), 2u);
  EXPECT_EQ(bins.bin_of(59.5), 0u);
  const AgeBins spurious{{60.0, 75.0, 90.0}};
  EXPECT_EQ(spurious.bin_of(75.0), 1u);
  EXPECT_EQ(spurious.count(), 2u);
}

TEST(Metrics, Threshold) {
  const std::vector<double> p{0.0, 0.4999, 0.5, 0.9};
  EXPECT_EQ(threshold(p), (std::vector<bool>{false, false, true, true}));
}

TEST(Histogram, SingleAge) {
  const std::vector<double> ages{75.0};
  const Histogram h = age_histogram(ages, 5.0);
  ASSERT_EQ(h.counts.size(), 6u);
  EXPECT_EQ(h.total(), 1u);
  EXPECT_EQ(std::count(h.counts.begin(), h.counts.end(), 1u), 1);
  EXPECT_EQ(h.counts[3], 1u);
  EXPECT_EQ(h.bin_lo(3), 75.0);
}

TEST(Histogram, UpperEdgeInLastBin) {
  const std::vector<double> ages{90.0, 60.0};
  const Histogram h = age_histogram(ages, 5.0);
  EXPECT_EQ(h.counts.front(), 1u);
  EXPECT_EQ(h.counts.back(), 1u);
}

TEST(Histogram, UniformDrawsAreFlat) {
  Rng rng(3);
  std::vector<double> ages;
  for (int i = 0; i < 10000; ++i) ages.push_back(rng.uniform(60.0, 90.0));
  const Histogram h = age_histogram(ages, 5.0);
  const auto [lo, hi] = std::minmax_element(h.counts.begin(), h.counts.end());
  EXPECT_LT(static_cast<double>(*hi) / static_cast<double>(*lo), 1.3);
}

TEST(Histogram, MassConservation) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> ages;
    const std::size_t n = rng.index(500);
    for (std::size_t i = 0; i < n; ++i) ages.push_back(rng.uniform(55.0, 95.0));
    EXPECT_EQ(age_histogram(ages, 2.5).total(), n);
  }
}
