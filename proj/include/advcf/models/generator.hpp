#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "advcf/autodiff/adam.hpp"
#include "advcf/encoding/fourier.hpp"
#include "advcf/models/mlp.hpp"
#include "advcf/synthworld/dataset.hpp"

namespace advcf::models {

/// What a generator keeps from a source sample: identity and diagnosis.
struct Subject {
  world::MorphLatent latent;
  Diagnosis diagnosis = Diagnosis::CN;
};

Subject subject_of(const world::SynthSample& s);

/// Conditional generator x_hat = G(x, a). Implementations are frozen during
/// the age game; only the ages carry gradients.
class Generator {
 public:
  virtual ~Generator() = default;

  /// Rows (n x H*W) for `subjects` at the matching one-element `ages` (years),
  /// recorded on the ages' tape.
  virtual ad::Var generate(std::span<const Subject> subjects, std::span<const ad::Var> ages) const = 0;

  /// Tape-free batch.
  ad::Tensor generate(std::span<const Subject> subjects, std::span<const double> ages) const;
  ad::Tensor generate_one(const Subject& subject, double age) const;

  virtual std::size_t image_dim() const = 0;
  virtual std::string kind() const = 0;
};

/// The renderer itself used as G; the fidelity oracle for every other generator.
class AnalyticGenerator final : public Generator {
 public:
  explicit AnalyticGenerator(world::RenderConfig cfg) : cfg_(cfg) {}

  using Generator::generate;
  ad::Var generate(std::span<const Subject> subjects, std::span<const ad::Var> ages) const override;
  std::size_t image_dim() const override { return cfg_.size * cfg_.size; }
  std::string kind() const override { return "analytic"; }
  const world::RenderConfig& config() const { return cfg_; }

 private:
  world::RenderConfig cfg_;
};

struct NeuralGeneratorConfig {
  std::vector<std::size_t> hidden = {128, 128};
  enc::EncoderParams encoder;
};

void to_json(nlohmann::json& j, const NeuralGeneratorConfig& c);
void from_json(const nlohmann::json& j, NeuralGeneratorConfig& c);

/// MLP over concat(gamma(v), latent features) with a tanh-squashed image
/// output. The conditioning v = (normalized age, diagnosis code) goes through
/// the Fourier encoder, so d(image)/d(age) is available.
class NeuralGenerator final : public Generator {
 public:
  NeuralGenerator(const NeuralGeneratorConfig& cfg, std::size_t image_size, const world::LatentRanges& ranges,
                  std::uint64_t init_seed);

  using Generator::generate;
  ad::Var generate(std::span<const Subject> subjects, std::span<const ad::Var> ages) const override;
  /// Same map with externally bound weights (for training the generator).
  ad::Var generate_with(std::span<const Subject> subjects, std::span<const ad::Var> ages,
                        std::span<const ad::Var> params) const;

  std::size_t image_dim() const override { return image_size_ * image_size_; }
  std::string kind() const override { return "neural"; }

  /// Latent fields rescaled to [-1, 1] over the sampling ranges.
  std::array<double, 4> features(const world::MorphLatent& latent) const;

  const NeuralGeneratorConfig& config() const { return cfg_; }
  const enc::FourierEncoder& encoder() const { return encoder_; }
  const world::LatentRanges& ranges() const { return ranges_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

 private:
  NeuralGeneratorConfig cfg_;
  std::size_t image_size_;
  world::LatentRanges ranges_;
  enc::FourierEncoder encoder_;
  Mlp net_;
};

struct DistillConfig {
  int steps = 3000;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double decay = 1e-4;
  std::size_t validation_samples = 256;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const DistillConfig& c);
void from_json(const nlohmann::json& j, DistillConfig& c);

/// Fixed set of (subject, age) pairs for measuring fidelity.
struct FidelitySet {
  std::vector<Subject> subjects;
  std::vector<double> ages;
};

/// Uniform latents, ages in [60, 90], balanced diagnoses.
FidelitySet sample_fidelity_set(const world::LatentRanges& ranges, std::size_t n, std::uint64_t seed);

/// Mean squared pixel error of `g` against `oracle` over the set.
double fidelity_mse(const Generator& g, const Generator& oracle, const FidelitySet& set);

struct DistillReport {
  double initial_mse = 0.0;
  double final_mse = 0.0;
  std::vector<double> step_loss;
};

/// Regresses `g` onto `oracle` with fresh random (latent, age, diagnosis)
/// draws every step. Throws ad::NonFiniteError on divergence.
DistillReport distill_generator(NeuralGenerator& g, const AnalyticGenerator& oracle, const DistillConfig& cfg);

}  // namespace advcf::models
