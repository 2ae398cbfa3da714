#include "advcf/augment/game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "advcf/json_util.hpp"

namespace advcf::aug {
namespace {

std::string_view init_name(InitPolicy p) { return p == InitPolicy::RealAge ? "real_age" : "uniform_to_max"; }
std::string_view bounds_name(AgeBounds b) { return b == AgeBounds::PerClass ? "per_class" : "global"; }
std::string_view units_name(StepUnits u) { return u == StepUnits::Years ? "years" : "normalized"; }

template <class E>
E parse_enum(const nlohmann::json& j, const char* key, std::initializer_list<std::pair<std::string_view, E>> options,
             E fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  const std::string s = it->get<std::string>();
  for (const auto& [name, value] : options) {
    if (s == name) return value;
  }
  throw ConfigError(std::string("adversarial: bad value '") + s + "' for " + key);
}

// Repeated argmax; quadratic but independent of the sort used by rank_by_loss.
std::vector<std::size_t> brute_force_top(std::span<const double> losses, std::span<const std::uint64_t> ids,
                                         std::size_t n) {
  std::vector<bool> taken(losses.size(), false);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = losses.size();
    for (std::size_t i = 0; i < losses.size(); ++i) {
      if (taken[i]) continue;
      if (best == losses.size() || losses[i] > losses[best] || (losses[i] == losses[best] && ids[i] < ids[best])) {
        best = i;
      }
    }
    taken[best] = true;
    out.push_back(best);
  }
  return out;
}

std::vector<std::uint64_t> ids_of(const world::Dataset& data) {
  std::vector<std::uint64_t> ids;
  ids.reserve(data.size());
  for (const auto& s : data) ids.push_back(s.id);
  return ids;
}

std::vector<std::size_t> random_subset(std::size_t size, std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(std::span(idx));
  idx.resize(n);
  return idx;
}

void run_game(models::Classifier& c, const models::Generator& g, const world::Dataset& pool, const AdvConfig& cfg,
              const world::Dataset* val, Selection selection, AdvResult& result) {
  if (cfg.k == 0) return;
  std::vector<std::size_t> sources;
  if (selection == Selection::Hard) {
    sources = cfg.per_class_selection ? select_hard_per_class(c, pool, cfg.n, cfg.verify_selection)
                                      : select_hard(c, pool, cfg.n, cfg.verify_selection);
  } else {
    Rng pick(derive_seed(cfg.seed, "select"));
    sources = random_subset(pool.size(), cfg.n, pick);
  }
  Rng init_rng(derive_seed(cfg.seed, "init"));
  AdvState state = init_target_ages(pool, std::move(sources), cfg, init_rng);
  for (std::size_t i : state.sources) {
    result.source_ids.push_back(pool[i].id);
    result.source_diagnoses.push_back(pool[i].diagnosis);
  }
  result.initial_ages = state.ages;

  ad::AdamState opt(cfg.train.adam());
  Rng shuffle(derive_seed(cfg.seed, "shuffle"));
  for (int it = 0; it < cfg.k; ++it) {
    AscentRecord rec = ascend_target_ages(state, pool, g, c, cfg);
    const SynSet syn = synthesize(state, pool, g);
    update_classifier(c, opt, pool, syn, cfg.train.batch_size, shuffle);
    result.synthesized += syn.size();

    IterationRecord h;
    h.iteration = state.iteration;
    h.ages = state.ages;
    h.mean_loss = rec.mean_loss;
    if (val && !val->empty()) h.val_accuracy = models::evaluate(c, *val).overall_accuracy();
    result.history.push_back(std::move(h));
    result.ascents.push_back(std::move(rec));
  }
  result.final_ages = state.ages;
}

}  // namespace

void AdvConfig::validate() const {
  if (k < 0) throw ConfigError("adversarial: k must be >= 0");
  if (n < 1) throw ConfigError("adversarial: n must be >= 1");
  if (!(step_size > 0.0)) throw ConfigError("adversarial: step size must be positive");
  if (!(min_age < max_age) || min_age < kMinAge || max_age > kMaxAge) {
    throw ConfigError("adversarial: age bounds must be ordered and inside [60, 90]");
  }
  if (!(train.learning_rate > 0.0) || train.batch_size == 0) {
    throw ConfigError("adversarial: classifier learning rate and batch size must be positive");
  }
}

void to_json(nlohmann::json& j, const AdvConfig& c) {
  j = {{"k", c.k},
       {"n", c.n},
       {"step_size", c.step_size},
       {"step_units", units_name(c.step_units)},
       {"min_age", c.min_age},
       {"max_age", c.max_age},
       {"init", init_name(c.init)},
       {"bounds", bounds_name(c.bounds)},
       {"per_class_selection", c.per_class_selection},
       {"train", c.train},
       {"seed", c.seed},
       {"verify_selection", c.verify_selection}};
}

void from_json(const nlohmann::json& j, AdvConfig& c) {
  require_keys(j,
               {"k", "n", "step_size", "step_units", "min_age", "max_age", "init", "bounds", "per_class_selection",
                "train", "seed", "verify_selection"},
               "adversarial");
  read_opt(j, "k", c.k);
  read_opt(j, "n", c.n);
  read_opt(j, "step_size", c.step_size);
  c.step_units = parse_enum(j, "step_units", {{"normalized", StepUnits::Normalized}, {"years", StepUnits::Years}},
                            c.step_units);
  read_opt(j, "min_age", c.min_age);
  read_opt(j, "max_age", c.max_age);
  c.init = parse_enum(j, "init", {{"uniform_to_max", InitPolicy::UniformToMax}, {"real_age", InitPolicy::RealAge}},
                      c.init);
  c.bounds = parse_enum(j, "bounds", {{"global", AgeBounds::Global}, {"per_class", AgeBounds::PerClass}}, c.bounds);
  read_opt(j, "per_class_selection", c.per_class_selection);
  if (auto it = j.find("train"); it != j.end()) {
    nlohmann::json merged = c.train;
    merged.update(*it);
    c.train = merged.get<models::TrainConfig>();
  }
  read_opt(j, "seed", c.seed);
  read_opt(j, "verify_selection", c.verify_selection);
  c.validate();
}

std::vector<std::size_t> rank_by_loss(std::span<const double> losses, std::span<const std::uint64_t> ids,
                                      std::size_t n) {
  if (losses.size() != ids.size()) throw std::invalid_argument("rank_by_loss: losses and ids differ in length");
  if (losses.empty()) throw std::invalid_argument("hard selection on an empty dataset");
  if (n > losses.size()) {
    throw std::invalid_argument("hard selection: N = " + std::to_string(n) + " exceeds dataset size " +
                                std::to_string(losses.size()));
  }
  std::vector<std::size_t> idx(losses.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (losses[a] != losses[b]) return losses[a] > losses[b];
                      return ids[a] < ids[b];
                    });
  idx.resize(n);
  return idx;
}

std::vector<std::size_t> select_hard(const models::Classifier& c, const world::Dataset& data, std::size_t n,
                                     bool verify) {
  if (data.empty()) throw std::invalid_argument("hard selection on an empty dataset");
  const auto examples = models::examples_of(data);
  const auto losses = models::per_sample_loss(c, examples);
  const auto ids = ids_of(data);
  auto picked = rank_by_loss(losses, ids, n);
  if (verify && picked != brute_force_top(losses, ids, n)) {
    throw std::logic_error("hard selection disagrees with the brute-force oracle");
  }
  return picked;
}

std::vector<std::size_t> select_hard_per_class(const models::Classifier& c, const world::Dataset& data,
                                               std::size_t n, bool verify) {
  if (data.empty()) throw std::invalid_argument("hard selection on an empty dataset");
  const auto examples = models::examples_of(data);
  const auto losses = models::per_sample_loss(c, examples);
  std::vector<std::size_t> out;
  for (Diagnosis dx : {Diagnosis::CN, Diagnosis::AD}) {
    std::vector<std::size_t> members;
    std::vector<double> l;
    std::vector<std::uint64_t> ids;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].diagnosis != dx) continue;
      members.push_back(i);
      l.push_back(losses[i]);
      ids.push_back(data[i].id);
    }
    if (members.empty()) continue;
    const std::size_t take = std::min(n / 2, members.size());
    auto picked = rank_by_loss(l, ids, take);
    if (verify && picked != brute_force_top(l, ids, take)) {
      throw std::logic_error("hard selection disagrees with the brute-force oracle");
    }
    for (std::size_t p : picked) out.push_back(members[p]);
  }
  return out;
}

AdvState init_target_ages(const world::Dataset& data, std::vector<std::size_t> sources, const AdvConfig& cfg,
                          Rng& rng) {
  AdvState st;
  st.sources = std::move(sources);
  for (std::size_t i : st.sources) {
    const world::SynthSample& s = data.at(i);
    const double chron = std::clamp(s.chron_age, cfg.min_age, cfg.max_age);
    double lo = cfg.min_age;
    double hi = cfg.max_age;
    if (cfg.bounds == AgeBounds::PerClass) {
      (s.diagnosis == Diagnosis::AD ? lo : hi) = chron;
    }
    const double a = cfg.init == InitPolicy::RealAge ? chron : rng.uniform(chron, cfg.max_age);
    st.ages.push_back(std::clamp(a, lo, hi));
    st.lower.push_back(lo);
    st.upper.push_back(hi);
  }
  return st;
}

double age_step(double grad_years, double step_size, StepUnits units) {
  if (units == StepUnits::Years) return step_size * grad_years;
  // With v = (a - 60) / 30: dv = step * dL/dv = step * 30 * dL/da, and da = 30 dv.
  return step_size * kAgeSpan * kAgeSpan * grad_years;
}

double ascend_age(double age, double grad_years, double step_size, StepUnits units, double lo, double hi) {
  return std::clamp(age + age_step(grad_years, step_size, units), lo, hi);
}

AscentRecord ascend_target_ages(AdvState& state, const world::Dataset& data, const models::Generator& g,
                                const models::Classifier& c, const AdvConfig& cfg) {
  const std::size_t n = state.sources.size();
  AscentRecord rec;
  if (n == 0) return rec;
  ad::Tape tape;
  std::vector<ad::Var> ages;
  std::vector<models::Subject> subjects;
  ad::Tensor labels({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    ages.push_back(tape.param(ad::Tensor::scalar(state.ages[i])));
    subjects.push_back(models::subject_of(data.at(state.sources[i])));
    labels[i] = data[state.sources[i]].label();
  }
  const ad::Var mean_loss = ad::bce_loss(c.forward(g.generate(subjects, ages)), labels);
  // Sources are independent rows, so d(sum of losses)/da_i = dL_i/da_i.
  const ad::Var total = ad::affine_scale_shift(mean_loss, static_cast<double>(n), 0.0);
  const ad::Gradients grads = ad::backward(tape, total);

  rec.mean_loss = mean_loss.value().item();
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = grads.of(ages[i]).item();
    if (!std::isfinite(gi)) {
      throw ad::NonFiniteError("age gradient not finite for sample " + std::to_string(data[state.sources[i]].id) +
                               " at iteration " + std::to_string(state.iteration));
    }
    const double delta = age_step(gi, cfg.step_size, cfg.step_units);
    state.ages[i] = std::clamp(state.ages[i] + delta, state.lower[i], state.upper[i]);
    rec.grad.push_back(gi);
    rec.pre_clip_delta.push_back(delta);
  }
  rec.ages = state.ages;
  ++state.iteration;
  return rec;
}

SynSet synthesize_at(std::span<const std::size_t> sources, std::span<const double> ages, const world::Dataset& data,
                     const models::Generator& g) {
  if (sources.size() != ages.size()) throw std::invalid_argument("synthesize: sources and ages differ in length");
  SynSet syn;
  if (sources.empty()) return syn;
  std::vector<models::Subject> subjects;
  for (std::size_t i : sources) subjects.push_back(models::subject_of(data.at(i)));
  const ad::Tensor rows = g.generate(subjects, ages);
  const std::size_t dim = g.image_dim();
  for (std::size_t r = 0; r < sources.size(); ++r) {
    const auto first = rows.buffer().begin() + static_cast<std::ptrdiff_t>(r * dim);
    syn.images.emplace_back(ad::Shape{1, dim}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(dim)));
    syn.labels.push_back(data[sources[r]].label());
    syn.source_ids.push_back(data[sources[r]].id);
    syn.target_ages.push_back(ages[r]);
  }
  return syn;
}

SynSet synthesize(const AdvState& state, const world::Dataset& data, const models::Generator& g) {
  return synthesize_at(state.sources, state.ages, data, g);
}

double update_classifier(models::Classifier& c, ad::AdamState& opt, const world::Dataset& pool, const SynSet& syn,
                         std::size_t batch_size, Rng& shuffle) {
  auto examples = models::examples_of(pool);
  for (std::size_t i = 0; i < syn.size(); ++i) examples.push_back({&syn.images[i], syn.labels[i]});
  return models::train_epoch(c, opt, examples, batch_size, shuffle);
}

void to_json(nlohmann::json& j, const IterationRecord& r) {
  j = {{"iteration", r.iteration}, {"ages", r.ages}, {"mean_loss", r.mean_loss}};
  j["val_accuracy"] = r.val_accuracy ? nlohmann::json(*r.val_accuracy) : nlohmann::json(nullptr);
}

void write_history(std::ostream& out, const AdvResult& r) {
  for (const IterationRecord& h : r.history) out << nlohmann::json(h).dump() << '\n';
}

AdvResult adversarial_train(models::Classifier& c, const models::Generator& g, const world::Dataset& train,
                            const AdvConfig& cfg, const world::Dataset* val, Selection selection) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("adversarial training on an empty dataset");
  AdvResult result;
  result.store_size = train.size();
  run_game(c, g, train, cfg, val, selection, result);
  return result;
}

world::Dataset make_store(const world::Dataset& train, double m_percent, std::uint64_t seed) {
  if (!(m_percent > 0.0 && m_percent <= 100.0)) throw std::invalid_argument("M must lie in (0, 100]");
  if (train.empty()) throw std::invalid_argument("cannot build a store from an empty dataset");
  if (m_percent == 100.0) return train;
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(train.size()) * m_percent / 100.0)));
  Rng rng(derive_seed(seed, "store"));
  auto idx = random_subset(train.size(), count, rng);
  std::sort(idx.begin(), idx.end());
  world::Dataset store;
  store.reserve(idx.size());
  for (std::size_t i : idx) store.push_back(train[i]);
  return store;
}

AdvResult adversarial_train_with_store(models::Classifier& c, const models::Generator& g, const world::Dataset& train,
                                       double m_percent, const AdvConfig& cfg, const world::Dataset* val,
                                       Selection selection) {
  cfg.validate();
  const world::Dataset store = make_store(train, m_percent, cfg.seed);
  AdvConfig local = cfg;
  AdvResult result;
  result.store_size = store.size();
  if (local.n > store.size()) {
    result.warnings.push_back("N reduced from " + std::to_string(local.n) + " to the store size " +
                              std::to_string(store.size()));
    local.n = store.size();
  }
  run_game(c, g, store, local, val, selection, result);
  return result;
}

}  // namespace advcf::aug
