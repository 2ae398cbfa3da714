#include "advcf/augment/generator_game.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "advcf/json_util.hpp"

namespace advcf::aug {

void GeneratorGameConfig::validate() const {
  if (epochs < 0 || g_steps < 0) throw ConfigError("generator game: epochs and g_steps must be >= 0");
  if (synth_per_epoch == 0 || fidelity_samples == 0 || g_batch_size == 0) {
    throw ConfigError("generator game: synth_per_epoch, g_batch_size and fidelity_samples must be positive");
  }
  if (!(g_learning_rate > 0.0)) throw ConfigError("generator game: g_learning_rate must be positive");
  if (max_age < kMinAge || max_age > kMaxAge) throw ConfigError("generator game: max_age must lie in [60, 90]");
  if (!(train.learning_rate > 0.0) || train.batch_size == 0) {
    throw ConfigError("generator game: classifier learning rate and batch size must be positive");
  }
}

void to_json(nlohmann::json& j, const GeneratorGameConfig& c) {
  j = {{"epochs", c.epochs},
       {"synth_per_epoch", c.synth_per_epoch},
       {"g_batch_size", c.g_batch_size},
       {"g_steps", c.g_steps},
       {"g_learning_rate", c.g_learning_rate},
       {"max_age", c.max_age},
       {"train", c.train},
       {"fidelity_samples", c.fidelity_samples},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, GeneratorGameConfig& c) {
  require_keys(j,
               {"epochs", "synth_per_epoch", "g_batch_size", "g_steps", "g_learning_rate", "max_age", "train", "fidelity_samples",
                "seed"},
               "generator_game");
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "synth_per_epoch", c.synth_per_epoch);
  read_opt(j, "g_batch_size", c.g_batch_size);
  read_opt(j, "g_steps", c.g_steps);
  read_opt(j, "g_learning_rate", c.g_learning_rate);
  read_opt(j, "max_age", c.max_age);
  if (auto it = j.find("train"); it != j.end()) {
    nlohmann::json merged = c.train;
    merged.update(*it);
    c.train = merged.get<models::TrainConfig>();
  }
  read_opt(j, "fidelity_samples", c.fidelity_samples);
  read_opt(j, "seed", c.seed);
  c.validate();
}

namespace {

// One ascent step on the generator weights; false if anything went non-finite.
bool ascend_generator(models::NeuralGenerator& g, const models::Classifier& c, std::span<const models::Subject> subjects,
                      std::span<const double> ages, const ad::Tensor& labels, ad::AdamState& opt, double& loss_out) {
  ad::Tape tape;
  const auto gparams = g.net().bind(tape, true);
  const auto cparams = c.net().bind(tape, false);
  std::vector<ad::Var> age_vars;
  age_vars.reserve(ages.size());
  for (double a : ages) age_vars.push_back(tape.constant(ad::Tensor::scalar(a)));
  try {
    const ad::Var images = g.generate_with(subjects, age_vars, gparams);
    const ad::Var loss = ad::bce_loss(c.forward(images, cparams), labels);
    loss_out = loss.value().item();
    const ad::Gradients grads = ad::backward(tape, loss);
    std::vector<ad::Tensor> neg;
    neg.reserve(gparams.size());
    for (const auto& p : gparams) {
      ad::Tensor t = grads.of(p);
      if (!t.all_finite()) return false;
      for (double& v : t.buffer()) v = -v;
      neg.push_back(std::move(t));
    }
    std::vector<ad::Tensor> backup = g.net().params;
    ad::adam_step(g.net().params, neg, opt);
    for (const auto& t : g.net().params) {
      if (!t.all_finite()) {
        g.net().params = std::move(backup);
        return false;
      }
    }
  } catch (const ad::NonFiniteError&) {
    return false;
  }
  return true;
}

}  // namespace

GeneratorGameResult train_generator_adversarial(models::NeuralGenerator& g, const models::AnalyticGenerator& oracle,
                                                models::Classifier& c, const world::Dataset& train,
                                                const GeneratorGameConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("generator game on an empty dataset");
  GeneratorGameResult result;
  const models::FidelitySet fid = models::sample_fidelity_set(g.ranges(), cfg.fidelity_samples, cfg.seed);
  result.fidelity.push_back(models::fidelity_mse(g, oracle, fid));

  ad::AdamConfig gcfg;
  gcfg.learning_rate = cfg.g_learning_rate;
  gcfg.decay = 0.0;
  ad::AdamState g_opt(gcfg);
  ad::AdamState c_opt(cfg.train.adam());
  Rng pick(derive_seed(cfg.seed, "select"));
  Rng age_rng(derive_seed(cfg.seed, "init"));
  Rng shuffle(derive_seed(cfg.seed, "shuffle"));
  const std::size_t n = std::min(cfg.synth_per_epoch, train.size());

  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (!result.diverged_at) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      pick.shuffle(std::span(order));
      double loss_sum = 0.0;
      int steps = 0;
      for (std::size_t start = 0; start < order.size(); start += cfg.g_batch_size) {
        if (cfg.g_steps > 0 && steps == cfg.g_steps) break;
        const std::size_t end = std::min(order.size(), start + cfg.g_batch_size);
        std::vector<models::Subject> subjects;
        std::vector<double> ages;
        ad::Tensor labels({end - start, 1});
        for (std::size_t i = start; i < end; ++i) {
          const world::SynthSample& s = train[order[i]];
          subjects.push_back(models::subject_of(s));
          ages.push_back(age_rng.uniform(std::min(s.chron_age, cfg.max_age), cfg.max_age));
          labels[i - start] = s.label();
        }
        double loss = 0.0;
        if (!ascend_generator(g, c, subjects, ages, labels, g_opt, loss)) {
          result.diverged_at = epoch;
          break;
        }
        loss_sum += loss;
        ++steps;
      }
      result.g_loss.push_back(steps > 0 ? loss_sum / steps : 0.0);
    }

    std::vector<std::size_t> sources;
    std::vector<double> ages;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t s = pick.index(train.size());
      sources.push_back(s);
      ages.push_back(age_rng.uniform(std::min(train[s].chron_age, cfg.max_age), cfg.max_age));
    }
    const SynSet syn = synthesize_at(sources, ages, train, g);
    update_classifier(c, c_opt, train, syn, cfg.train.batch_size, shuffle);
    result.synthesized += syn.size();
    result.fidelity.push_back(models::fidelity_mse(g, oracle, fid));
  }
  return result;
}

}  // namespace advcf::aug
