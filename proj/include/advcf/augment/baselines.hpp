#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "advcf/augment/game.hpp"
#include "advcf/synthworld/conventional.hpp"

namespace advcf::aug {

enum class BaselineKind { Naive, RSRS, HSRS, RSAT, JTT, ConvAug, MaxUp };

std::string_view baseline_name(BaselineKind k);
std::optional<BaselineKind> parse_baseline(std::string_view name);

struct BaselineParams {
  /// Counterfactuals per source sample for RSRS/HSRS.
  std::size_t n_synthesis = 5;
  /// JTT: how many times the error set appears in the up-sampled set.
  std::size_t lambda_up = 2;
  /// JTT classifier learning rate.
  double jtt_learning_rate = 1e-5;
  /// MaxUp: augmentations drawn per sample.
  std::size_t maxup_batch = 4;
  /// Ops used by ConvAug and MaxUp.
  std::vector<world::AugOp> aug_ops = {world::AugOp::Rotate, world::AugOp::Shift, world::AugOp::Scale,
                                       world::AugOp::Flip};

  void validate() const;
};

void to_json(nlohmann::json& j, const BaselineParams& p);
void from_json(const nlohmann::json& j, BaselineParams& p);

/// Everything a baseline may draw on. `pretrained` is the shared starting
/// point; `pretrain` and `init_seed` let ConvAug and MaxUp train from the same
/// initialization as the pretrained classifier.
struct BaselineContext {
  const models::Classifier* pretrained = nullptr;
  const models::Generator* generator = nullptr;
  const world::Dataset* pool = nullptr;
  const world::Dataset* full_train = nullptr;
  AdvConfig adv;
  models::TrainConfig pretrain;
  models::ClassifierConfig arch;
  std::uint64_t init_seed = 0;
  BaselineParams params;
};

struct BaselineResult {
  models::Classifier classifier;
  std::size_t synthesized = 0;
  /// JTT: number of misclassified pool samples; RSRS/HSRS: sources used.
  std::size_t selected = 0;
  std::optional<AdvResult> game;
};

/// Runs one comparison method against the pool (the full training split, or
/// the store in the continual setting).
///   Naive   - the pretrained classifier as is.
///   RSRS    - N random sources x n_synthesis random target ages, then k epochs on pool + syn.
///   HSRS    - as RSRS with hard sources.
///   RSAT    - the age game with random sources.
///   JTT     - up-sample the misclassified pool samples and train k epochs at the JTT rate.
///   ConvAug - train from scratch with one random conventional augmentation per sample and epoch.
///   MaxUp   - train from scratch on the worst of maxup_batch augmentations of each sample.
BaselineResult run_baseline(BaselineKind kind, const BaselineContext& ctx);

/// Random target ages within each source's bounds (the "random synthesis").
SynSet random_synthesis(std::span<const std::size_t> sources, const world::Dataset& data,
                        const models::Generator& g, const AdvConfig& cfg, std::size_t per_source, Rng& rng);

/// Pool with every misclassified sample repeated so it appears lambda_up
/// times in total. Returns examples pointing into `pool`.
std::vector<models::Example> jtt_upsample(const models::Classifier& c, const world::Dataset& pool,
                                          std::size_t lambda_up, std::size_t* error_count = nullptr);

/// One MaxUp step: for every sample keep the augmentation with the highest
/// loss under `c`, then take an Adam step on those. Returns the batch loss.
double maxup_step(models::Classifier& c, ad::AdamState& opt, std::span<const models::Example> batch,
                  std::span<const std::vector<ad::Tensor>> candidates);

}  // namespace advcf::aug
