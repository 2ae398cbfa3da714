#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advcf/models/classifier.hpp"
#include "advcf/models/generator.hpp"

namespace advcf::aug {

enum class InitPolicy { UniformToMax, RealAge };

/// Global: every target age lives in [min_age, max_age]. PerClass: AD ages
/// may only grow (ageing, [chron, max]) and CN ages only shrink
/// (rejuvenation, [min, chron]).
enum class AgeBounds { Global, PerClass };

/// Unit of the age step: Normalized applies the step on the encoder's
/// [0, 1] age scale, Years applies it directly to ages in years.
enum class StepUnits { Normalized, Years };

struct AdvConfig {
  int k = 5;
  std::size_t n = 100;
  double step_size = 0.01;
  StepUnits step_units = StepUnits::Normalized;
  double min_age = kMinAge;
  double max_age = kMaxAge;
  InitPolicy init = InitPolicy::UniformToMax;
  AgeBounds bounds = AgeBounds::Global;
  /// Select n/2 hard samples from each class instead of n overall.
  bool per_class_selection = false;
  /// Optimizer settings for the classifier updates; `epochs` is unused.
  models::TrainConfig train;
  std::uint64_t seed = 0;
  /// Check every hard selection against a full-sort oracle.
  bool verify_selection = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const AdvConfig& c);
void from_json(const nlohmann::json& j, AdvConfig& c);

/// The `n` samples with the largest per-sample bce under `c`, ordered by loss
/// descending with ties broken by ascending sample id. Returns dataset indices.
std::vector<std::size_t> select_hard(const models::Classifier& c, const world::Dataset& data, std::size_t n,
                                     bool verify = false);

/// Same ranking given precomputed losses; `ids` breaks ties.
std::vector<std::size_t> rank_by_loss(std::span<const double> losses, std::span<const std::uint64_t> ids,
                                      std::size_t n);

/// n/2 hardest CN followed by n/2 hardest AD (fewer if a class runs short).
std::vector<std::size_t> select_hard_per_class(const models::Classifier& c, const world::Dataset& data,
                                               std::size_t n, bool verify = false);

/// Target ages of the max player, one per selected source sample.
struct AdvState {
  std::vector<std::size_t> sources;  // indices into the dataset
  std::vector<double> ages;
  std::vector<double> lower;
  std::vector<double> upper;
  int iteration = 0;
};

/// UniformToMax draws a_i ~ U[chron_i, max_age]; RealAge sets a_i = chron_i.
AdvState init_target_ages(const world::Dataset& data, std::vector<std::size_t> sources, const AdvConfig& cfg,
                          Rng& rng);

/// Age change in years produced by one ascent step on a gradient in years.
double age_step(double grad_years, double step_size, StepUnits units);

/// Applies one step and clips: clamp(a + age_step(grad), lo, hi).
double ascend_age(double age, double grad_years, double step_size, StepUnits units, double lo, double hi);

struct AscentRecord {
  std::vector<double> grad;            // dL_i/da_i in 1/years
  std::vector<double> pre_clip_delta;  // years
  std::vector<double> ages;            // after clipping
  double mean_loss = 0.0;              // mean L_C over the sources before the step
};

/// One max-player step: every a_i moves along its own loss gradient
/// dL_i/da_i, then is clipped to its bounds. The classifier is not modified.
/// Throws ad::NonFiniteError if any gradient is not finite.
AscentRecord ascend_target_ages(AdvState& state, const world::Dataset& data, const models::Generator& g,
                                const models::Classifier& c, const AdvConfig& cfg);

struct SynSet {
  std::vector<ad::Tensor> images;  // each 1 x H*W
  std::vector<double> labels;
  std::vector<std::uint64_t> source_ids;
  std::vector<double> target_ages;

  std::size_t size() const { return images.size(); }
};

/// One counterfactual per source at its current target age; labels copied.
SynSet synthesize(const AdvState& state, const world::Dataset& data, const models::Generator& g);
/// Counterfactuals of `sources` at explicit ages.
SynSet synthesize_at(std::span<const std::size_t> sources, std::span<const double> ages, const world::Dataset& data,
                     const models::Generator& g);

/// One shuffled epoch of Adam on pool + syn; returns the mean batch loss.
double update_classifier(models::Classifier& c, ad::AdamState& opt, const world::Dataset& pool, const SynSet& syn,
                         std::size_t batch_size, Rng& shuffle);

struct IterationRecord {
  int iteration = 0;
  std::vector<double> ages;
  double mean_loss = 0.0;
  std::optional<double> val_accuracy;
};

void to_json(nlohmann::json& j, const IterationRecord& r);

struct AdvResult {
  std::vector<std::uint64_t> source_ids;
  std::vector<Diagnosis> source_diagnoses;
  std::vector<double> initial_ages;
  std::vector<double> final_ages;
  std::vector<IterationRecord> history;
  std::vector<AscentRecord> ascents;
  std::size_t synthesized = 0;
  std::size_t store_size = 0;
  std::vector<std::string> warnings;
};

/// Writes one JSON object per line, one line per iteration.
void write_history(std::ostream& out, const AdvResult& r);

/// Source choice for the game: hardest samples, or a uniform random subset.
enum class Selection { Hard, Random };

/// select -> init ages -> k x (ascend -> synthesize -> one epoch on pool + syn).
/// Adam state is fresh at the start and persists across the k iterations.
/// `val`, when given, is evaluated after every update for the history.
AdvResult adversarial_train(models::Classifier& c, const models::Generator& g, const world::Dataset& train,
                            const AdvConfig& cfg, const world::Dataset* val = nullptr,
                            Selection selection = Selection::Hard);

/// Keeps a seeded random M% of `train` as the store (in original order), runs
/// the game on it and replays it with every synthetic set. N is cut to the
/// store size with a warning if needed. M = 100 reproduces adversarial_train.
AdvResult adversarial_train_with_store(models::Classifier& c, const models::Generator& g, const world::Dataset& train,
                                       double m_percent, const AdvConfig& cfg, const world::Dataset* val = nullptr,
                                       Selection selection = Selection::Hard);

/// The retained subset for a given M; shared with the baselines.
world::Dataset make_store(const world::Dataset& train, double m_percent, std::uint64_t seed);

}  // namespace advcf::aug
