#include "advcf/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace advcf::harness {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Accuracy-per-group layout. Bin-major (60-70 CN, 60-70 AD, ...) for the
// balanced worlds, class-major (CN 60-75, CN 75-90, AD ...) for the spurious one.
std::vector<std::string> group_columns(const metrics::AgeBins& bins, bool class_major) {
  std::vector<std::string> cols;
  if (class_major) {
    for (Diagnosis d : {Diagnosis::CN, Diagnosis::AD}) {
      for (std::size_t b = 0; b < bins.count(); ++b) cols.push_back(bins.label(b) + " " + std::string(diagnosis_name(d)));
    }
  } else {
    for (std::size_t b = 0; b < bins.count(); ++b) {
      for (Diagnosis d : {Diagnosis::CN, Diagnosis::AD}) cols.push_back(bins.label(b) + " " + std::string(diagnosis_name(d)));
    }
  }
  cols.emplace_back("overall");
  cols.emplace_back("worst");
  return cols;
}

std::vector<double> group_row(const metrics::MetricsReport& r, bool class_major) {
  std::vector<double> v;
  const std::size_t nb = r.bins.count();
  if (class_major) {
    for (Diagnosis d : {Diagnosis::CN, Diagnosis::AD}) {
      for (std::size_t b = 0; b < nb; ++b) v.push_back(100.0 * r.group_accuracy(b, d));
    }
  } else {
    for (std::size_t b = 0; b < nb; ++b) {
      for (Diagnosis d : {Diagnosis::CN, Diagnosis::AD}) v.push_back(100.0 * r.group_accuracy(b, d));
    }
  }
  v.push_back(100.0 * r.overall_accuracy());
  v.push_back(100.0 * r.worst_group_accuracy());
  return v;
}

std::vector<std::string> pr_columns(const metrics::AgeBins& bins) {
  std::vector<std::string> cols;
  for (std::size_t b = 0; b < bins.count(); ++b) {
    cols.push_back(bins.label(b) + " precision");
    cols.push_back(bins.label(b) + " recall");
  }
  cols.emplace_back("overall precision");
  cols.emplace_back("overall recall");
  return cols;
}

std::vector<double> pr_row(const metrics::MetricsReport& r) {
  std::vector<double> v;
  for (const auto& c : r.per_bin) {
    v.push_back(100.0 * c.precision());
    v.push_back(100.0 * c.recall());
  }
  v.push_back(100.0 * r.overall.precision());
  v.push_back(100.0 * r.overall.recall());
  return v;
}

aug::AdvConfig seeded_adv(const ExperimentConfig& cfg, const SeedPlan& plan) {
  aug::AdvConfig a = cfg.adversarial;
  a.seed = plan.adv;
  a.train.seed = plan.adv;
  return a;
}

nlohmann::json game_summary(const aug::AdvResult& g) {
  return {{"synthesized", g.synthesized}, {"store_size", g.store_size}, {"sources", g.source_ids.size()},
          {"warnings", g.warnings}};
}

struct MethodRun {
  models::Classifier classifier;
  nlohmann::json extra;
  std::optional<aug::AdvResult> game;
};

// Runs one method starting from `pretrained`. With `m_percent` < 100 the
// proposed method keeps a store of the training split and the baselines use
// the same store as their pool.
MethodRun run_method(const std::string& method, const ExperimentConfig& cfg, const SeedWorld& w,
                     const models::Classifier& pretrained, const models::Generator& g, const aug::AdvConfig& adv,
                     double m_percent, const world::Dataset* val) {
  const world::Dataset& train = w.splits.train;
  MethodRun out{pretrained, nlohmann::json::object(), std::nullopt};
  if (method == "proposed") {
    out.game = m_percent < 100.0 ? aug::adversarial_train_with_store(out.classifier, g, train, m_percent, adv, val)
                                 : aug::adversarial_train(out.classifier, g, train, adv, val);
    out.extra = game_summary(*out.game);
    return out;
  }
  const aug::BaselineKind kind = *aug::parse_baseline(method);
  const world::Dataset store = m_percent < 100.0 ? aug::make_store(train, m_percent, adv.seed) : world::Dataset{};
  aug::BaselineContext ctx;
  ctx.pretrained = &pretrained;
  ctx.generator = &g;
  ctx.pool = m_percent < 100.0 ? &store : &train;
  ctx.full_train = &train;
  ctx.adv = adv;
  ctx.pretrain = cfg.pretrain;
  ctx.pretrain.seed = w.plan.shuffle;
  ctx.arch = cfg.classifier;
  ctx.init_seed = w.plan.init;
  ctx.params = cfg.baseline_params;
  aug::BaselineResult r = aug::run_baseline(kind, ctx);
  out.classifier = std::move(r.classifier);
  out.extra = {{"synthesized", r.synthesized}, {"selected", r.selected}, {"pool_size", ctx.pool->size()}};
  if (r.game) {
    out.extra["game"] = game_summary(*r.game);
    out.game = std::move(r.game);
  }
  return out;
}

void log_line(const LogFn& log, std::uint64_t seed, const std::string& msg) {
  if (log) log("[seed " + std::to_string(seed) + "] " + msg);
}

std::vector<double> select_by(const aug::AdvResult& g, const std::vector<double>& v, Diagnosis dx) {
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (g.source_diagnoses[i] == dx) out.push_back(v[i]);
  }
  return out;
}

double mean_or_nan(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void run_groups(const ExperimentConfig& cfg, const SeedWorld& w, const models::Classifier& pretrained,
                SeedResult& out, const LogFn& log) {
  const bool spurious = cfg.kind == ExperimentKind::Spurious;
  const metrics::AgeBins bins{cfg.table_bins()};
  Table groups{"groups", group_columns(bins, spurious), {}, {}};
  Table pr{"precision_recall", pr_columns(bins), {}, {}};
  const aug::AdvConfig adv = seeded_adv(cfg, w.plan);
  const models::Generator& g = w.generator(cfg.generator.neural);
  for (const auto& method : cfg.methods) {
    MethodRun m = run_method(method, cfg, w, pretrained, g, adv, 100.0, &w.splits.val);
    const auto report = models::evaluate(m.classifier, w.splits.test, bins);
    groups.add_row(method, group_row(report, spurious));
    pr.add_row(method, pr_row(report));
    out.details["methods"][method] = m.extra;
    log_line(log, out.seed, method + " overall " + fmt("%.1f", 100.0 * report.overall_accuracy()) + " worst " +
                                fmt("%.1f", 100.0 * report.worst_group_accuracy()));
    if (method == "proposed" && m.game) {
      std::ostringstream hist;
      aug::write_history(hist, *m.game);
      out.history = hist.str();
      const auto& game = *m.game;
      nlohmann::json ages;
      for (Diagnosis dx : {Diagnosis::CN, Diagnosis::AD}) {
        const auto before = select_by(game, game.initial_ages, dx);
        const auto after = select_by(game, game.final_ages, dx);
        ages[std::string(diagnosis_name(dx))] = {{"initial", before},
                                                 {"final", after},
                                                 {"initial_mean", mean_or_nan(before)},
                                                 {"final_mean", mean_or_nan(after)}};
      }
      out.details["target_ages"] = ages;
      if (spurious) {
        // Young AD sources: the group the spurious rule gets right in training.
        std::vector<double> shift;
        for (std::size_t i = 0; i < game.source_ids.size(); ++i) {
          if (game.source_diagnoses[i] != Diagnosis::AD) continue;
          shift.push_back(game.final_ages[i] - game.initial_ages[i]);
        }
        out.details["young_ad_age_shift"] = mean_or_nan(shift);
      }
    }
  }
  out.tables.push_back(std::move(groups));
  out.tables.push_back(std::move(pr));
}

void run_continual(const ExperimentConfig& cfg, const SeedWorld& w, const models::Classifier& pretrained,
                   SeedResult& out, const LogFn& log) {
  Table t{"continual", {}, {}, {}};
  for (double m : cfg.m_values) t.columns.push_back("M=" + fmt("%g", m));
  const aug::AdvConfig adv = seeded_adv(cfg, w.plan);
  const models::Generator& g = w.generator(cfg.generator.neural);
  for (const auto& method : cfg.methods) {
    std::vector<double> row;
    for (double m : cfg.m_values) {
      // Without a store the naive model is just the pretrained one, which
      // has seen the whole training set; it only applies at M = 100.
      if (method == "naive" && m < 100.0) {
        row.push_back(kNaN);
        continue;
      }
      MethodRun r = run_method(method, cfg, w, pretrained, g, adv, m, nullptr);
      const double acc = 100.0 * models::evaluate(r.classifier, w.splits.test).overall_accuracy();
      row.push_back(acc);
      out.details["methods"][method]["M=" + fmt("%g", m)] = r.extra;
      log_line(log, out.seed, method + " M=" + fmt("%g", m) + " " + fmt("%.1f", acc));
    }
    t.add_row(method, std::move(row));
  }
  out.tables.push_back(std::move(t));
}

void run_n_sweep(const ExperimentConfig& cfg, const SeedWorld& w, const models::Classifier& pretrained,
                 SeedResult& out, const LogFn& log) {
  Table t{"n_sweep", {}, {}, {}};
  for (std::size_t n : cfg.n_values) t.columns.push_back("N=" + std::to_string(n));
  const models::Generator& g = w.generator(cfg.generator.neural);
  for (const auto& method : cfg.methods) {
    std::vector<double> row;
    for (std::size_t n : cfg.n_values) {
      aug::AdvConfig adv = seeded_adv(cfg, w.plan);
      adv.n = n;
      MethodRun r = run_method(method, cfg, w, pretrained, g, adv, cfg.sweep_m, nullptr);
      const double acc = 100.0 * models::evaluate(r.classifier, w.splits.test).overall_accuracy();
      row.push_back(acc);
      out.details["methods"][method]["N=" + std::to_string(n)] = r.extra;
      log_line(log, out.seed, method + " N=" + std::to_string(n) + " " + fmt("%.1f", acc));
    }
    t.add_row(method, std::move(row));
  }
  out.tables.push_back(std::move(t));
}

void run_g_vs_c(const ExperimentConfig& cfg, SeedWorld& w, const models::Classifier& pretrained, SeedResult& out,
                const LogFn& log) {
  Table acc{"g_vs_c", {"overall", "worst"}, {}, {}};
  const aug::AdvConfig adv = seeded_adv(cfg, w.plan);
  auto add = [&](const std::string& name, const models::Classifier& c) {
    const auto r = models::evaluate(c, w.splits.test);
    acc.add_row(name, {100.0 * r.overall_accuracy(), 100.0 * r.worst_group_accuracy()});
    log_line(log, out.seed, name + " overall " + fmt("%.1f", 100.0 * r.overall_accuracy()));
  };
  add("naive", pretrained);
  {
    models::Classifier c = pretrained;
    aug::adversarial_train(c, *w.neural, w.splits.train, adv);
    add("proposed", c);
  }
  models::Classifier c = pretrained;
  models::NeuralGenerator g = *w.neural;
  aug::GeneratorGameConfig gg = cfg.generator_game;
  gg.seed = w.plan.adv;
  gg.train = adv.train;
  const auto res = aug::train_generator_adversarial(g, w.oracle, c, w.splits.train, gg);
  add("g_vs_c", c);
  const double start = res.fidelity.front(), end = res.fidelity.back();
  Table fid{"fidelity", {"post_distill", "final", "ratio"}, {}, {}};
  fid.add_row("g_vs_c", {start, end, start > 0.0 ? end / start : kNaN});
  out.details["generator_game"] = {{"fidelity", res.fidelity},
                                   {"g_loss", res.g_loss},
                                   {"diverged_at", res.diverged_at ? nlohmann::json(*res.diverged_at) : nullptr},
                                   {"synthesized", res.synthesized}};
  log_line(log, out.seed, "fidelity " + fmt("%.4f", start) + " -> " + fmt("%.4f", end));
  out.tables.push_back(std::move(acc));
  out.tables.push_back(std::move(fid));
}

}  // namespace

const models::Generator& SeedWorld::generator(bool use_neural) const {
  if (use_neural) {
    if (!neural) throw std::logic_error("neural generator requested but not distilled");
    return *neural;
  }
  return oracle;
}

SeedWorld build_world(const ExperimentConfig& cfg, std::uint64_t master_seed, bool need_neural) {
  const SeedPlan plan = plan_seeds(master_seed);
  world::DatasetSpec spec;
  world::Splits splits;
  if (cfg.kind == ExperimentKind::Spurious) {
    world::SpuriousSpec s = cfg.spurious;
    s.seed = plan.data;
    spec = world::spurious_dataset_spec(s);
    splits = world::make_spurious(s);
  } else {
    spec = cfg.dataset;
    spec.seed = plan.data;
    splits = world::sample_dataset(spec);
  }
  SeedWorld w{plan, spec, std::move(splits), models::AnalyticGenerator(spec.render), nullptr, std::nullopt};
  if (need_neural) {
    models::NeuralGeneratorConfig net = cfg.generator.network;
    net.encoder.seed = plan.encoder;
    w.neural = std::make_unique<models::NeuralGenerator>(net, spec.render.size, spec.latents,
                                                         derive_seed(plan.init, "generator"));
    models::DistillConfig d = cfg.generator.distill;
    d.seed = plan.distill;
    w.distill = models::distill_generator(*w.neural, w.oracle, d);
  }
  return w;
}

models::Classifier pretrain(const ExperimentConfig& cfg, const SeedWorld& w, models::TrainHistory* history) {
  const std::size_t side = w.spec.render.size;
  models::Classifier c(side * side, cfg.classifier, w.plan.init);
  models::TrainConfig tc = cfg.pretrain;
  tc.seed = w.plan.shuffle;
  auto h = models::pretrain_classifier(c, w.splits.train, tc);
  if (history) *history = std::move(h);
  return c;
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const LogFn& log) {
  SeedResult out;
  out.seed = seed;
  const bool need_neural = cfg.generator.neural || cfg.kind == ExperimentKind::GvsC;
  SeedWorld w = build_world(cfg, seed, need_neural);
  out.details["seed_plan"] = w.plan;
  out.details["dataset_fingerprint"] = {{"train", hex64(world::fingerprint(w.splits.train))},
                                        {"val", hex64(world::fingerprint(w.splits.val))},
                                        {"test", hex64(world::fingerprint(w.splits.test))}};
  if (w.distill) {
    out.details["distill"] = {{"initial_mse", w.distill->initial_mse}, {"final_mse", w.distill->final_mse}};
    log_line(log, seed, "distilled generator, fidelity mse " + fmt("%.5f", w.distill->final_mse));
  }
  models::TrainHistory hist;
  const models::Classifier pre = pretrain(cfg, w, &hist);
  out.details["pretrain_final_loss"] = hist.epoch_loss.empty() ? 0.0 : hist.epoch_loss.back();
  log_line(log, seed, "pretrained classifier");

  switch (cfg.kind) {
    case ExperimentKind::Main:
    case ExperimentKind::Baselines:
    case ExperimentKind::Spurious:
      run_groups(cfg, w, pre, out, log);
      break;
    case ExperimentKind::Continual:
      run_continual(cfg, w, pre, out, log);
      break;
    case ExperimentKind::NSweep:
      run_n_sweep(cfg, w, pre, out, log);
      break;
    case ExperimentKind::GvsC:
      run_g_vs_c(cfg, w, pre, out, log);
      break;
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, int jobs, const LogFn& log) {
  cfg.validate();
  ExperimentResult r;
  r.seeds.resize(cfg.seeds.size());
  std::mutex log_mutex;
  const LogFn safe_log = [&](const std::string& s) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    log(s);
  };
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      try {
        r.seeds[i] = run_seed(cfg, cfg.seeds[i], safe_log);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1,
                                                        cfg.seeds.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const std::size_t n_tables = r.seeds.front().tables.size();
  for (std::size_t t = 0; t < n_tables; ++t) {
    std::vector<Table> per_seed;
    for (const auto& s : r.seeds) per_seed.push_back(s.tables.at(t));
    r.mean.push_back(table_mean(per_seed));
    r.std.push_back(table_std(per_seed));
  }
  return r;
}

std::vector<std::string> expected_files() { return {"manifest.json", "results.json"}; }

void write_results(const ExperimentConfig& cfg, const ExperimentResult& r, const std::filesystem::path& out,
                   double wall_seconds) {
  std::filesystem::create_directories(out);
  nlohmann::json config = cfg;
  config.erase("output");
  nlohmann::json manifest = {{"manifest_version", 1},
                             {"library_version", kVersion},
                             {"kind", kind_name(cfg.kind)},
                             {"config_hash", config_hash(cfg)},
                             {"config", config},
                             {"optimizer_state", "Adam state persists across the k game iterations of a run"},
                             {"runs", nlohmann::json::array()}};
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& s : r.seeds) {
    manifest["runs"].push_back({{"seed", s.seed},
                                {"seed_plan", s.details.at("seed_plan")},
                                {"encoder_seed", s.details.at("seed_plan").at("encoder")},
                                {"dataset_fingerprint", s.details.at("dataset_fingerprint")}});
    per_seed.push_back({{"seed", s.seed}, {"tables", s.tables}, {"details", s.details}});
    const auto dir = out / "seeds" / ("seed_" + std::to_string(s.seed));
    for (const auto& t : s.tables) write_atomic(dir / (t.name + ".csv"), to_csv(t, t.name == "fidelity" ? 5 : 1));
    write_json(dir / "details.json", s.details);
    if (!s.history.empty()) write_atomic(dir / "history.jsonl", s.history);
  }
  write_json(out / "manifest.json", manifest);
  write_json(out / "results.json", {{"kind", kind_name(cfg.kind)},
                                    {"config_hash", config_hash(cfg)},
                                    {"mean", r.mean},
                                    {"std", r.std},
                                    {"per_seed", per_seed}});
  for (std::size_t t = 0; t < r.mean.size(); ++t) {
    const int decimals = r.mean[t].name == "fidelity" ? 5 : 1;
    write_atomic(out / (r.mean[t].name + ".csv"), to_csv(r.mean[t], decimals));
    write_atomic(out / (r.mean[t].name + "_std.csv"), to_csv(r.std[t], decimals));
  }
  if (cfg.kind == ExperimentKind::Spurious) {
    for (Diagnosis dx : {Diagnosis::CN, Diagnosis::AD}) {
      const std::string name(diagnosis_name(dx));
      std::vector<double> before, after;
      for (const auto& s : r.seeds) {
        if (!s.details.contains("target_ages")) continue;
        const auto& a = s.details["target_ages"][name];
        for (double v : a["initial"]) before.push_back(v);
        for (double v : a["final"]) after.push_back(v);
      }
      if (before.empty()) continue;
      const auto hb = metrics::age_histogram(before, 2.5);
      const auto ha = metrics::age_histogram(after, 2.5);
      write_atomic(out / ("hist_" + name + ".svg"),
                   histogram_svg(hb, ha, "Target ages of " + name + " hard samples, before and after"));
    }
  }
  write_atomic(out / "timing.txt", fmt("wall_seconds %.2f\n", wall_seconds));
}

}  // namespace advcf::harness
