// Command-line runner for the synthetic ageing-world experiments.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "advcf/harness/checkpoint.hpp"
#include "advcf/harness/experiment.hpp"
#include "advcf/harness/report.hpp"
#include "advcf/harness/selftest.hpp"
#include "advcf/json_util.hpp"

using namespace advcf;
using namespace advcf::harness;

namespace {

struct Common {
  std::string config;
  std::string seed_list;
  std::string out;

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = load_config_or_manifest(config);
    if (!seed_list.empty()) cfg.seeds = parse_seed_list(seed_list);
    if (!out.empty()) cfg.output = out;
    if (cfg.output.empty()) throw ConfigError("no output directory: set 'output' in the config or pass --out");
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Experiment config (or a manifest.json)")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed-list", c.seed_list, "Seeds, e.g. 0-4 or 0,3,7 (overrides the config)");
  sub->add_option("--out", c.out, "Output directory (overrides the config)");
}

void log_stderr(const std::string& s) { std::cerr << s << std::endl; }

int cmd_generate(const Common& c) {
  const ExperimentConfig cfg = c.resolve();
  for (std::uint64_t seed : cfg.seeds) {
    const SeedWorld w = build_world(cfg, seed, false);
    const std::filesystem::path dir = std::filesystem::path(cfg.output) / ("seed_" + std::to_string(seed));
    std::filesystem::create_directories(dir);
    world::export_dataset(w.splits.train, w.spec, dir / "train");
    world::export_dataset(w.splits.val, w.spec, dir / "val");
    world::export_dataset(w.splits.test, w.spec, dir / "test");
    std::printf("seed %llu: %zu/%zu/%zu samples -> %s\n", static_cast<unsigned long long>(seed), w.splits.train.size(),
                w.splits.val.size(), w.splits.test.size(), dir.string().c_str());
  }
  return 0;
}

int cmd_pretrain(const Common& c) {
  const ExperimentConfig cfg = c.resolve();
  for (std::uint64_t seed : cfg.seeds) {
    const SeedWorld w = build_world(cfg, seed, false);
    models::TrainHistory hist;
    const models::Classifier clf = pretrain(cfg, w, &hist);
    const auto r = models::evaluate(clf, w.splits.test, metrics::AgeBins{cfg.table_bins()});
    const auto stem = std::filesystem::path(cfg.output) / ("seed_" + std::to_string(seed)) / "classifier";
    save_weights(stem, clf.net(),
                 {{"kind", "classifier"},
                  {"config_hash", config_hash(cfg)},
                  {"seed_plan", w.plan},
                  {"final_loss", hist.epoch_loss.empty() ? 0.0 : hist.epoch_loss.back()},
                  {"test_accuracy", r.overall_accuracy()}});
    std::printf("seed %llu: test accuracy %.1f, worst group %.1f -> %s\n", static_cast<unsigned long long>(seed),
                100.0 * r.overall_accuracy(), 100.0 * r.worst_group_accuracy(), stem.string().c_str());
  }
  return 0;
}

int cmd_distill(const Common& c) {
  const ExperimentConfig cfg = c.resolve();
  for (std::uint64_t seed : cfg.seeds) {
    const SeedWorld w = build_world(cfg, seed, true);
    const auto stem = std::filesystem::path(cfg.output) / ("seed_" + std::to_string(seed)) / "generator";
    save_weights(stem, w.neural->net(),
                 {{"kind", "neural_generator"},
                  {"config_hash", config_hash(cfg)},
                  {"network", w.neural->config()},
                  {"seed_plan", w.plan},
                  {"initial_mse", w.distill->initial_mse},
                  {"final_mse", w.distill->final_mse}});
    std::printf("seed %llu: fidelity mse %.5f -> %.5f -> %s\n", static_cast<unsigned long long>(seed),
                w.distill->initial_mse, w.distill->final_mse, stem.string().c_str());
  }
  return 0;
}

int cmd_run(const Common& c, bool check, int jobs) {
  const ExperimentConfig cfg = c.resolve();
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult r = run_experiment(cfg, jobs, log_stderr);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_results(cfg, r, cfg.output, secs);
  std::vector<CriterionResult> crit;
  std::cout << report(cfg.output, &crit);
  if (!check) return 0;
  for (const auto& k : crit) {
    if (!k.passed) return 1;
  }
  return 0;
}

int cmd_report(const std::string& dir) {
  std::cout << report(dir);
  return 0;
}

int cmd_selftest(std::uint64_t seed) {
  bool ok = true;
  for (const auto& k : selftest(seed)) {
    std::printf("criterion %d %s: %s -- %s\n", k.id, k.passed ? "PASS" : "FAIL", k.name.c_str(), k.detail.c_str());
    ok = ok && k.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial counterfactual augmentation on a synthetic ageing world"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  Common gen_opts, pre_opts, dist_opts, run_opts;
  auto* gen = app.add_subcommand("generate-data", "Sample and export the dataset splits per seed");
  add_common(gen, gen_opts);
  auto* pre = app.add_subcommand("pretrain", "Pretrain the classifier per seed and save its weights");
  add_common(pre, pre_opts);
  auto* dist = app.add_subcommand("distill", "Distill the neural generator per seed and save its weights");
  add_common(dist, dist_opts);
  auto* run = app.add_subcommand("run", "Run an experiment and write tables, plots and a manifest");
  add_common(run, run_opts);
  bool check = false;
  int jobs = 1;
  run->add_flag("--check", check, "Exit nonzero if an acceptance threshold is missed");
  run->add_option("--jobs", jobs, "Seeds run in parallel")->check(CLI::PositiveNumber);
  std::string report_dir;
  auto* rep = app.add_subcommand("report", "Summarize an output directory");
  rep->add_option("--out,dir", report_dir, "Output directory of a run")->required();
  std::uint64_t selftest_seed = 0;
  auto* st = app.add_subcommand("selftest", "Gradient and invariant suites");
  st->add_option("--seed", selftest_seed, "Seed for the random test instances");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_generate(gen_opts);
    if (*pre) return cmd_pretrain(pre_opts);
    if (*dist) return cmd_distill(dist_opts);
    if (*run) return cmd_run(run_opts, check, jobs);
    if (*rep) return cmd_report(report_dir);
    if (*st) return cmd_selftest(selftest_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
