#include "advcf/harness/config.hpp"

#include <cstdio>
#include <fstream>

#include "advcf/harness/io.hpp"
#include "advcf/json_util.hpp"

namespace advcf::harness {
namespace {

constexpr std::pair<std::string_view, ExperimentKind> kKinds[] = {
    {"main", ExperimentKind::Main},         {"continual", ExperimentKind::Continual},
    {"n_sweep", ExperimentKind::NSweep},    {"spurious", ExperimentKind::Spurious},
    {"g_vs_c", ExperimentKind::GvsC},       {"baselines", ExperimentKind::Baselines},
};

}  // namespace

std::string_view kind_name(ExperimentKind k) {
  for (const auto& [n, kind] : kKinds) {
    if (kind == k) return n;
  }
  return "unknown";
}

ExperimentKind parse_kind(std::string_view name) {
  for (const auto& [n, kind] : kKinds) {
    if (n == name) return kind;
  }
  throw ConfigError("unknown experiment kind '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("config: at least one seed is required");
  if (classifier.hidden.empty()) throw ConfigError("config: classifier needs a hidden layer");
  adversarial.validate();
  baseline_params.validate();
  generator_game.validate();
  if (pretrain.epochs < 0 || !(pretrain.learning_rate > 0.0)) throw ConfigError("config: bad pretrain settings");
  const bool needs_methods = kind == ExperimentKind::Main || kind == ExperimentKind::Continual ||
                             kind == ExperimentKind::NSweep || kind == ExperimentKind::Spurious ||
                             kind == ExperimentKind::Baselines;
  if (needs_methods && methods.empty()) throw ConfigError("config: 'methods' is empty");
  for (const auto& m : methods) {
    if (m != "proposed" && !aug::parse_baseline(m)) throw ConfigError("config: unknown method '" + m + "'");
  }
  for (double m : m_values) {
    if (!(m > 0.0 && m <= 100.0)) throw ConfigError("config: M values must lie in (0, 100]");
  }
  if (!(sweep_m > 0.0 && sweep_m <= 100.0)) throw ConfigError("config: sweep_m must lie in (0, 100]");
  for (std::size_t n : n_values) {
    if (n == 0) throw ConfigError("config: N values must be positive");
  }
  if (kind == ExperimentKind::Continual && m_values.empty()) throw ConfigError("config: 'm_values' is empty");
  if (kind == ExperimentKind::NSweep && n_values.empty()) throw ConfigError("config: 'n_values' is empty");
  world::validate(kind == ExperimentKind::Spurious ? spurious.render : dataset.render);
}

std::vector<double> ExperimentConfig::table_bins() const {
  if (kind == ExperimentKind::Spurious) return {kMinAge, world::kSpuriousSplitAge, kMaxAge};
  return dataset.bin_edges;
}

std::size_t ExperimentConfig::image_size() const {
  return kind == ExperimentKind::Spurious ? spurious.render.size : dataset.render.size;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"kind", kind_name(c.kind)},
       {"seeds", c.seeds},
       {"output", c.output},
       {"dataset", c.dataset},
       {"spurious", c.spurious},
       {"generator",
        {{"type", c.generator.neural ? "neural" : "analytic"},
         {"network", c.generator.network},
         {"distill", c.generator.distill}}},
       {"classifier", {{"hidden", c.classifier.hidden}}},
       {"pretrain", c.pretrain},
       {"adversarial", c.adversarial},
       {"methods", c.methods},
       {"baseline_params", c.baseline_params},
       {"m_values", c.m_values},
       {"n_values", c.n_values},
       {"sweep_m", c.sweep_m},
       {"generator_game", c.generator_game}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  require_keys(j,
               {"kind", "seeds", "output", "dataset", "spurious", "generator", "classifier", "pretrain", "adversarial",
                "methods", "baseline_params", "m_values", "n_values", "sweep_m", "generator_game"},
               "config");
  if (!j.contains("kind")) throw ConfigError("config: 'kind' is required");
  c = ExperimentConfig{};
  c.kind = parse_kind(j.at("kind").get<std::string>());
  read_opt(j, "seeds", c.seeds);
  read_opt(j, "output", c.output);
  if (auto it = j.find("dataset"); it != j.end()) c.dataset = it->get<world::DatasetSpec>();
  if (auto it = j.find("spurious"); it != j.end()) c.spurious = it->get<world::SpuriousSpec>();
  if (auto it = j.find("generator"); it != j.end()) {
    require_keys(*it, {"type", "network", "distill"}, "generator");
    const std::string type = it->value("type", std::string("analytic"));
    if (type != "analytic" && type != "neural") throw ConfigError("generator: type must be analytic or neural");
    c.generator.neural = type == "neural";
    if (auto n = it->find("network"); n != it->end()) c.generator.network = n->get<models::NeuralGeneratorConfig>();
    if (auto d = it->find("distill"); d != it->end()) c.generator.distill = d->get<models::DistillConfig>();
  }
  if (auto it = j.find("classifier"); it != j.end()) {
    require_keys(*it, {"hidden"}, "classifier");
    read_opt(*it, "hidden", c.classifier.hidden);
  }
  if (auto it = j.find("pretrain"); it != j.end()) c.pretrain = it->get<models::TrainConfig>();
  if (auto it = j.find("adversarial"); it != j.end()) c.adversarial = it->get<aug::AdvConfig>();
  read_opt(j, "methods", c.methods);
  if (auto it = j.find("baseline_params"); it != j.end()) c.baseline_params = it->get<aug::BaselineParams>();
  read_opt(j, "m_values", c.m_values);
  read_opt(j, "n_values", c.n_values);
  read_opt(j, "sweep_m", c.sweep_m);
  if (auto it = j.find("generator_game"); it != j.end()) c.generator_game = it->get<aug::GeneratorGameConfig>();
  c.validate();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_hash(const ExperimentConfig& c) {
  // Where results land does not change them.
  nlohmann::json j = c;
  j.erase("output");
  const std::string dump = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : dump) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SeedPlan plan_seeds(std::uint64_t master) {
  return {master,
          derive_seed(master, "data"),
          derive_seed(master, "encoder"),
          derive_seed(master, "init"),
          derive_seed(master, "shuffle"),
          derive_seed(master, "adv"),
          derive_seed(derive_seed(master, "adv"), "store"),
          derive_seed(master, "distill")};
}

void to_json(nlohmann::json& j, const SeedPlan& p) {
  j = {{"master", p.master}, {"data", p.data},   {"encoder", p.encoder}, {"init", p.init},
       {"shuffle", p.shuffle}, {"adv", p.adv}, {"store", p.store},     {"distill", p.distill}};
}

// "0,1,2" or "0-4" or a mix ("0-2,7").
std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = std::min(s.find(',', pos), s.size());
    const std::string item = s.substr(pos, comma - pos);
    if (item.empty()) throw ConfigError("empty entry in seed list '" + s + "'");
    const std::size_t dash = item.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoull(item));
      } else {
        const auto lo = std::stoull(item.substr(0, dash)), hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw ConfigError("descending seed range '" + item + "'");
        for (auto v = lo; v <= hi; ++v) out.push_back(v);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad seed list entry '" + item + "'");
    }
    pos = comma + 1;
  }
  return out;
}

// Accepts an experiment config or a manifest written by a previous run.
ExperimentConfig load_config_or_manifest(const std::filesystem::path& path) {
  const nlohmann::json j = read_json(path);
  if (j.contains("manifest_version")) return j.at("config").get<ExperimentConfig>();
  return load_config(path);
}

}  // namespace advcf::harness
