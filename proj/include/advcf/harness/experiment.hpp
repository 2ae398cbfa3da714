#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "advcf/harness/config.hpp"
#include "advcf/harness/io.hpp"

namespace advcf::harness {

using LogFn = std::function<void(const std::string&)>;

/// Data and generator shared by every method of one seed.
struct SeedWorld {
  SeedPlan plan;
  world::DatasetSpec spec;
  world::Splits splits;
  models::AnalyticGenerator oracle;
  /// Set when a neural generator was distilled for this seed.
  std::unique_ptr<models::NeuralGenerator> neural;
  std::optional<models::DistillReport> distill;

  const models::Generator& generator(bool use_neural) const;
};

/// Samples the splits and, if `need_neural`, distills a neural generator.
SeedWorld build_world(const ExperimentConfig& cfg, std::uint64_t master_seed, bool need_neural);

/// Fresh classifier pretrained on the world's training split.
models::Classifier pretrain(const ExperimentConfig& cfg, const SeedWorld& w, models::TrainHistory* history = nullptr);

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<Table> tables;
  /// Everything else worth keeping: seed plan, fingerprints, game traces.
  nlohmann::json details;
  /// Line-delimited per-iteration history of the proposed method, if run.
  std::string history;
};

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const LogFn& log = {});

struct ExperimentResult {
  std::vector<SeedResult> seeds;
  std::vector<Table> mean;
  std::vector<Table> std;
};

/// Runs every seed (up to `jobs` at once; each run is single-threaded) and
/// aggregates. Results do not depend on `jobs`.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs = 1, const LogFn& log = {});

/// Writes manifest.json, results.json, mean and std CSVs, per-seed files and,
/// for the spurious world, the target-age histograms. Wall-clock timings go
/// to timing.txt, the only file that differs between identical runs.
void write_results(const ExperimentConfig& cfg, const ExperimentResult& r, const std::filesystem::path& out,
                   double wall_seconds = 0.0);

/// Files report() needs in an output directory.
std::vector<std::string> expected_files();

}  // namespace advcf::harness
