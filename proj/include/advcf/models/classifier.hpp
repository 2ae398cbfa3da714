#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "advcf/autodiff/adam.hpp"
#include "advcf/metrics/metrics.hpp"
#include "advcf/models/mlp.hpp"
#include "advcf/synthworld/dataset.hpp"

namespace advcf::models {

struct ClassifierConfig {
  std::vector<std::size_t> hidden = {64, 32};
};

/// MLP over flattened images with relu hidden layers and a sigmoid output.
class Classifier {
 public:
  Classifier() = default;
  Classifier(std::size_t input_dim, const ClassifierConfig& cfg, std::uint64_t seed);

  /// Probabilities (B x 1) for a (B x input_dim) batch.
  ad::Var forward(const ad::Var& batch, std::span<const ad::Var> params) const;
  ad::Var forward(const ad::Var& batch) const;

  std::vector<double> predict(const ad::Tensor& batch) const;
  std::vector<double> predict(const world::Dataset& data) const;
  double predict_one(const ad::Tensor& image) const;

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  std::vector<ad::Tensor>& params() { return net_.params; }
  const std::vector<ad::Tensor>& params() const { return net_.params; }
  std::size_t input_dim() const { return net_.input_dim(); }

  friend bool operator==(const Classifier& a, const Classifier& b) { return a.net_.params == b.net_.params; }

 private:
  Mlp net_;
};

struct TrainConfig {
  double learning_rate = 1e-5;
  double decay = 1e-4;
  int epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  ad::AdamConfig adam() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Labelled image reference; images are owned elsewhere.
struct Example {
  const ad::Tensor* image;
  double label;
};

std::vector<Example> examples_of(const world::Dataset& data);

/// One Adam step on a single batch; returns the batch loss.
double train_step(Classifier& c, ad::AdamState& opt, const ad::Tensor& batch, const ad::Tensor& labels);

/// One shuffled pass over `examples`; returns the mean batch loss.
double train_epoch(Classifier& c, ad::AdamState& opt, std::span<const Example> examples, std::size_t batch_size,
                   Rng& shuffle);

struct TrainHistory {
  std::vector<double> epoch_loss;
};

/// Minimizes mean bce over `train` with a fresh Adam state. Throws
/// ad::NonFiniteError with the failing epoch if training diverges.
TrainHistory pretrain_classifier(Classifier& c, const world::Dataset& train, const TrainConfig& cfg);

/// Per-example bce under the current classifier.
std::vector<double> per_sample_loss(const Classifier& c, std::span<const Example> examples);
double mean_loss(const Classifier& c, std::span<const Example> examples);

metrics::MetricsReport evaluate(const Classifier& c, const world::Dataset& data, const metrics::AgeBins& bins = {});

}  // namespace advcf::models
