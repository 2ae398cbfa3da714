#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "advcf/augment/baselines.hpp"
#include "advcf/augment/generator_game.hpp"
#include "advcf/synthworld/dataset.hpp"

namespace advcf::harness {

inline constexpr std::string_view kVersion = "1.0.0";

enum class ExperimentKind { Main, Continual, NSweep, Spurious, GvsC, Baselines };

std::string_view kind_name(ExperimentKind k);
ExperimentKind parse_kind(std::string_view name);

struct GeneratorChoice {
  /// false: the analytic renderer; true: a neural generator distilled from it.
  bool neural = false;
  models::NeuralGeneratorConfig network;
  models::DistillConfig distill;
};

/// One experiment. Seeds inside the nested configs are placeholders: every
/// run derives them from its master seed (see SeedPlan).
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Main;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string output;
  world::DatasetSpec dataset;
  world::SpuriousSpec spurious;
  GeneratorChoice generator;
  models::ClassifierConfig classifier;
  models::TrainConfig pretrain;
  aug::AdvConfig adversarial;
  /// "proposed" plus baseline names, in table order.
  std::vector<std::string> methods;
  aug::BaselineParams baseline_params;
  std::vector<double> m_values = {1, 10, 20, 50, 100};
  std::vector<std::size_t> n_values = {1, 10, 50, 100};
  /// Store size used by the N sweep.
  double sweep_m = 1.0;
  aug::GeneratorGameConfig generator_game;

  void validate() const;
  /// Age bins the result tables use: the dataset's bins, or 60-75-90 for
  /// the spurious world.
  std::vector<double> table_bins() const;
  std::size_t image_size() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Reads and validates a config file; throws ConfigError with the path.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Hex FNV-1a of the canonical (fully resolved) JSON dump.
std::string config_hash(const ExperimentConfig& c);

/// Per-run seeds, all derived from the master seed by named stream.
struct SeedPlan {
  std::uint64_t master = 0;
  std::uint64_t data = 0;
  std::uint64_t encoder = 0;
  std::uint64_t init = 0;
  std::uint64_t shuffle = 0;
  /// Adversarial game; the baselines derive their "baseline" stream from it.
  std::uint64_t adv = 0;
  /// Store subset; derived from `adv`, matching make_store.
  std::uint64_t store = 0;
  std::uint64_t distill = 0;
};

SeedPlan plan_seeds(std::uint64_t master);
void to_json(nlohmann::json& j, const SeedPlan& p);

/// Seed list such as "0-4", "0,3,7" or "0-2,7". Throws ConfigError.
std::vector<std::uint64_t> parse_seed_list(const std::string& s);

/// Loads an experiment config, or the config embedded in a manifest.json
/// written by a previous run.
ExperimentConfig load_config_or_manifest(const std::filesystem::path& path);

}  // namespace advcf::harness
