#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "advcf/autodiff/tensor.hpp"
#include "advcf/random.hpp"
#include "advcf/synthworld/render.hpp"

namespace advcf::world {

struct SynthSample {
  std::uint64_t id = 0;
  MorphLatent latent;
  double chron_age = kMinAge;
  Diagnosis diagnosis = Diagnosis::CN;
  ad::Tensor image;

  double label() const { return label_of(diagnosis); }
};

using Dataset = std::vector<SynthSample>;

struct SplitCounts {
  /// counts[bin][diagnosis]
  std::vector<std::array<std::size_t, 2>> per_bin;
  std::size_t total() const;
};

/// What to sample: age-bin edges (ages uniform within each bin), per-split
/// counts for every (bin, diagnosis) cell, latent ranges, render settings.
struct DatasetSpec {
  std::vector<double> bin_edges = {60.0, 70.0, 80.0, 90.0};
  SplitCounts train;
  SplitCounts val;
  SplitCounts test;
  LatentRanges latents;
  RenderConfig render;
  std::uint64_t seed = 0;

  /// Same count in every cell of every split.
  static DatasetSpec balanced(std::size_t train_per_cell, std::size_t val_per_cell, std::size_t test_per_cell,
                              std::uint64_t seed);
};

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

MorphLatent sample_latent(const LatentRanges& ranges, Rng& rng);

/// Draws all three splits from one seeded stream. Every sample is a distinct
/// subject, so splits are subject-disjoint. Throws on an all-zero spec.
Splits sample_dataset(const DatasetSpec& spec);

/// Counts for the spurious-correlation world.
struct SpuriousSpec {
  std::size_t train_ad = 1000;  // ages [60, 75)
  std::size_t train_cn = 1000;  // ages [75, 90)
  std::size_t val_per_cell = 20;
  std::size_t test_per_cell = 250;
  LatentRanges latents;
  RenderConfig render;
  std::uint64_t seed = 0;
};

inline constexpr double kSpuriousSplitAge = 75.0;

/// Training AD only from [60, 75) and CN only from [75, 90); validation and
/// test cover both ranges for both classes.
DatasetSpec spurious_dataset_spec(const SpuriousSpec& spec);
Splits make_spurious(const SpuriousSpec& spec);

/// Raw images stored as a little-endian float64 array (N x H x W) next to a
/// JSON sidecar carrying the spec, seed, format version and sample metadata.
void export_dataset(const Dataset& data, const DatasetSpec& spec, const std::filesystem::path& stem);
Dataset import_dataset(const std::filesystem::path& stem, DatasetSpec* spec_out = nullptr);

void to_json(nlohmann::json& j, const LatentRanges& r);
void from_json(const nlohmann::json& j, LatentRanges& r);
void to_json(nlohmann::json& j, const RenderConfig& c);
void from_json(const nlohmann::json& j, RenderConfig& c);
void to_json(nlohmann::json& j, const SplitCounts& c);
void from_json(const nlohmann::json& j, SplitCounts& c);
void to_json(nlohmann::json& j, const DatasetSpec& s);
void from_json(const nlohmann::json& j, DatasetSpec& s);
void to_json(nlohmann::json& j, const SpuriousSpec& s);
void from_json(const nlohmann::json& j, SpuriousSpec& s);

/// Order-sensitive 64-bit fingerprint of a dataset's metadata and pixels.
std::uint64_t fingerprint(const Dataset& data);

}  // namespace advcf::world
