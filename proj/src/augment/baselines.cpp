#include "advcf/augment/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "advcf/json_util.hpp"

namespace advcf::aug {
namespace {

constexpr std::pair<std::string_view, BaselineKind> kNames[] = {
    {"naive", BaselineKind::Naive}, {"rsrs", BaselineKind::RSRS}, {"hsrs", BaselineKind::HSRS},
    {"rsat", BaselineKind::RSAT},   {"jtt", BaselineKind::JTT},   {"convaug", BaselineKind::ConvAug},
    {"maxup", BaselineKind::MaxUp},
};

void train_epochs(models::Classifier& c, std::vector<models::Example> examples, const models::TrainConfig& tc,
                  int epochs, std::uint64_t shuffle_seed) {
  ad::AdamState opt(tc.adam());
  Rng shuffle(shuffle_seed);
  for (int e = 0; e < epochs; ++e) models::train_epoch(c, opt, examples, tc.batch_size, shuffle);
}

world::AugOp pick_op(const BaselineParams& p, Rng& rng) { return p.aug_ops[rng.index(p.aug_ops.size())]; }

ad::Tensor image_2d(const ad::Tensor& img) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(img.numel()))));
  return img.rank() == 2 && img.dim(0) == side ? img : img.reshaped({side, side});
}

models::Classifier conv_aug(const BaselineContext& ctx, Rng& rng) {
  models::Classifier c(ctx.pretrained->input_dim(), ctx.arch, ctx.init_seed);
  const world::Dataset& data = *ctx.pool;
  ad::AdamState opt(ctx.pretrain.adam());
  Rng shuffle(derive_seed(ctx.pretrain.seed, "shuffle"));
  std::vector<ad::Tensor> augmented(data.size());
  std::vector<models::Example> examples(data.size());
  for (int e = 0; e < ctx.pretrain.epochs; ++e) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      augmented[i] = world::random_augment(image_2d(data[i].image), pick_op(ctx.params, rng), rng);
      examples[i] = {&augmented[i], data[i].label()};
    }
    models::train_epoch(c, opt, examples, ctx.pretrain.batch_size, shuffle);
  }
  return c;
}

models::Classifier max_up(const BaselineContext& ctx, Rng& rng) {
  models::Classifier c(ctx.pretrained->input_dim(), ctx.arch, ctx.init_seed);
  const world::Dataset& data = *ctx.pool;
  const auto all = models::examples_of(data);
  ad::AdamState opt(ctx.pretrain.adam());
  Rng shuffle(derive_seed(ctx.pretrain.seed, "shuffle"));
  std::vector<std::size_t> order(data.size());
  const std::size_t bs = ctx.pretrain.batch_size;
  for (int e = 0; e < ctx.pretrain.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<models::Example> batch;
      std::vector<std::vector<ad::Tensor>> cands;
      for (std::size_t i = start; i < end; ++i) {
        const models::Example& ex = all[order[i]];
        batch.push_back(ex);
        std::vector<ad::Tensor> set;
        const ad::Tensor base = image_2d(*ex.image);
        for (std::size_t m = 0; m < ctx.params.maxup_batch; ++m) {
          set.push_back(world::random_augment(base, pick_op(ctx.params, rng), rng));
        }
        cands.push_back(std::move(set));
      }
      maxup_step(c, opt, batch, cands);
    }
  }
  return c;
}

}  // namespace

std::string_view baseline_name(BaselineKind k) {
  for (const auto& [name, kind] : kNames) {
    if (kind == k) return name;
  }
  return "unknown";
}

std::optional<BaselineKind> parse_baseline(std::string_view name) {
  for (const auto& [n, kind] : kNames) {
    if (n == name) return kind;
  }
  return std::nullopt;
}

void BaselineParams::validate() const {
  if (n_synthesis == 0 || lambda_up == 0 || maxup_batch == 0 || !(jtt_learning_rate > 0.0) || aug_ops.empty()) {
    throw ConfigError("baselines: parameters must be positive and at least one augmentation op given");
  }
}

void to_json(nlohmann::json& j, const BaselineParams& p) {
  std::vector<std::string> ops;
  for (auto op : p.aug_ops) ops.emplace_back(world::aug_op_name(op));
  j = {{"n_synthesis", p.n_synthesis},
       {"lambda_up", p.lambda_up},
       {"jtt_learning_rate", p.jtt_learning_rate},
       {"maxup_batch", p.maxup_batch},
       {"aug_ops", ops}};
}

void from_json(const nlohmann::json& j, BaselineParams& p) {
  require_keys(j, {"n_synthesis", "lambda_up", "jtt_learning_rate", "maxup_batch", "aug_ops"}, "baseline_params");
  read_opt(j, "n_synthesis", p.n_synthesis);
  read_opt(j, "lambda_up", p.lambda_up);
  read_opt(j, "jtt_learning_rate", p.jtt_learning_rate);
  read_opt(j, "maxup_batch", p.maxup_batch);
  if (auto it = j.find("aug_ops"); it != j.end()) {
    p.aug_ops.clear();
    for (const auto& s : *it) {
      const auto op = world::parse_aug_op(s.get<std::string>());
      if (!op) throw ConfigError("baseline_params: unknown augmentation '" + s.get<std::string>() + "'");
      p.aug_ops.push_back(*op);
    }
  }
  p.validate();
}

SynSet random_synthesis(std::span<const std::size_t> sources, const world::Dataset& data,
                        const models::Generator& g, const AdvConfig& cfg, std::size_t per_source, Rng& rng) {
  // Bounds come from the same rule as the game; the initial ages are unused.
  AdvConfig real = cfg;
  real.init = InitPolicy::RealAge;
  Rng unused(0);
  const AdvState bounds = init_target_ages(data, {sources.begin(), sources.end()}, real, unused);
  std::vector<std::size_t> src;
  std::vector<double> ages;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (std::size_t r = 0; r < per_source; ++r) {
      src.push_back(sources[i]);
      ages.push_back(rng.uniform(bounds.lower[i], bounds.upper[i]));
    }
  }
  return synthesize_at(src, ages, data, g);
}

std::vector<models::Example> jtt_upsample(const models::Classifier& c, const world::Dataset& pool,
                                          std::size_t lambda_up, std::size_t* error_count) {
  auto examples = models::examples_of(pool);
  const auto pred = metrics::threshold(c.predict(pool));
  std::vector<models::Example> errors;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pred[i] != (pool[i].diagnosis == Diagnosis::AD)) errors.push_back(examples[i]);
  }
  if (error_count) *error_count = errors.size();
  for (std::size_t r = 1; r < lambda_up; ++r) examples.insert(examples.end(), errors.begin(), errors.end());
  return examples;
}

double maxup_step(models::Classifier& c, ad::AdamState& opt, std::span<const models::Example> batch,
                  std::span<const std::vector<ad::Tensor>> candidates) {
  if (batch.size() != candidates.size() || batch.empty()) throw std::invalid_argument("maxup: batch mismatch");
  std::vector<const ad::Tensor*> chosen;
  ad::Tensor labels({batch.size(), 1});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& set = candidates[i];
    if (set.empty()) throw std::invalid_argument("maxup: empty augmentation set");
    std::vector<const ad::Tensor*> rows;
    for (const auto& t : set) rows.push_back(&t);
    const auto p = c.predict(models::stack_rows(rows));
    std::size_t best = 0;
    double best_loss = ad::bce_value(p[0], batch[i].label);
    for (std::size_t m = 1; m < p.size(); ++m) {
      const double l = ad::bce_value(p[m], batch[i].label);
      if (l > best_loss) {
        best_loss = l;
        best = m;
      }
    }
    chosen.push_back(&set[best]);
    labels[i] = batch[i].label;
  }
  return models::train_step(c, opt, models::stack_rows(chosen), labels);
}

BaselineResult run_baseline(BaselineKind kind, const BaselineContext& ctx) {
  if (!ctx.pretrained || !ctx.pool || ctx.pool->empty()) throw std::invalid_argument("baseline: missing inputs");
  ctx.params.validate();
  ctx.adv.validate();
  const world::Dataset& pool = *ctx.pool;
  BaselineResult r{*ctx.pretrained, 0, 0, std::nullopt};
  Rng rng(derive_seed(ctx.adv.seed, "baseline"));
  AdvConfig adv = ctx.adv;
  adv.n = std::min(adv.n, pool.size());

  switch (kind) {
    case BaselineKind::Naive:
      break;
    case BaselineKind::RSRS:
    case BaselineKind::HSRS: {
      if (!ctx.generator) throw std::invalid_argument("baseline: generator required");
      std::vector<std::size_t> sources;
      if (kind == BaselineKind::HSRS) {
        sources = adv.per_class_selection ? select_hard_per_class(r.classifier, pool, adv.n, adv.verify_selection)
                                          : select_hard(r.classifier, pool, adv.n, adv.verify_selection);
      } else {
        std::vector<std::size_t> idx(pool.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        rng.shuffle(std::span(idx));
        sources.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(adv.n));
      }
      const SynSet syn = random_synthesis(sources, pool, *ctx.generator, adv, ctx.params.n_synthesis, rng);
      auto examples = models::examples_of(pool);
      for (std::size_t i = 0; i < syn.size(); ++i) examples.push_back({&syn.images[i], syn.labels[i]});
      train_epochs(r.classifier, std::move(examples), adv.train, adv.k, derive_seed(adv.seed, "shuffle"));
      r.synthesized = syn.size();
      r.selected = sources.size();
      break;
    }
    case BaselineKind::RSAT: {
      if (!ctx.generator) throw std::invalid_argument("baseline: generator required");
      r.game = adversarial_train(r.classifier, *ctx.generator, pool, adv, nullptr, Selection::Random);
      r.synthesized = r.game->synthesized;
      r.selected = r.game->source_ids.size();
      break;
    }
    case BaselineKind::JTT: {
      auto examples = jtt_upsample(r.classifier, pool, ctx.params.lambda_up, &r.selected);
      models::TrainConfig tc = adv.train;
      tc.learning_rate = ctx.params.jtt_learning_rate;
      train_epochs(r.classifier, std::move(examples), tc, adv.k, derive_seed(adv.seed, "shuffle"));
      break;
    }
    case BaselineKind::ConvAug:
      r.classifier = conv_aug(ctx, rng);
      break;
    case BaselineKind::MaxUp:
      r.classifier = max_up(ctx, rng);
      break;
  }
  return r;
}

}  // namespace advcf::aug
