#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "advcf/augment/game.hpp"

namespace advcf::aug {

/// Training the generator's weights against the classifier instead of the
/// target ages. Each epoch: one shuffled pass of ascent steps on the
/// generator weights over `train` (ages U[chron, max_age], raising the
/// classifier's mean bce), then `synth_per_epoch` counterfactuals of random
/// training samples from the updated generator and one classifier epoch on
/// train + syn.
struct GeneratorGameConfig {
  int epochs = 10;
  std::size_t synth_per_epoch = 100;
  std::size_t g_batch_size = 32;
  /// Caps the generator steps per epoch; 0 means a full pass.
  int g_steps = 0;
  double g_learning_rate = 1e-3;
  double max_age = kMaxAge;
  /// Classifier optimizer; `epochs` is unused.
  models::TrainConfig train;
  std::size_t fidelity_samples = 256;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const GeneratorGameConfig& c);
void from_json(const nlohmann::json& j, GeneratorGameConfig& c);

struct GeneratorGameResult {
  /// MSE against the oracle; entry 0 is before any generator update, then one
  /// entry per epoch.
  std::vector<double> fidelity;
  /// Mean classifier bce over each epoch's generator batches.
  std::vector<double> g_loss;
  /// Epoch at which a generator step produced non-finite values, if any.
  /// Generator updates stop there; the classifier keeps training on the
  /// last finite generator.
  std::optional<int> diverged_at;
  std::size_t synthesized = 0;
};

/// `g` is modified in place; `oracle` supplies the fidelity reference.
GeneratorGameResult train_generator_adversarial(models::NeuralGenerator& g, const models::AnalyticGenerator& oracle,
                                                models::Classifier& c, const world::Dataset& train,
                                                const GeneratorGameConfig& cfg);

}  // namespace advcf::aug
