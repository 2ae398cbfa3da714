#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "advcf/augment/baselines.hpp"
#include "advcf/augment/game.hpp"
#include "advcf/augment/generator_game.hpp"
#include "advcf/json_util.hpp"
#include "test_util.hpp"

using namespace advcf;
using namespace advcf::aug;

namespace {

struct SmallWorld {
  world::DatasetSpec spec;
  world::Splits splits;
  models::AnalyticGenerator g;
  models::Classifier pretrained;

  explicit SmallWorld(std::size_t per_cell = 10, std::uint64_t seed = 1)
      : spec(make_spec(per_cell, seed)), splits(world::sample_dataset(spec)), g(spec.render) {
    pretrained = models::Classifier(spec.render.size * spec.render.size, {{16}}, seed);
    models::TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.epochs = 5;
    models::pretrain_classifier(pretrained, splits.train, tc);
  }

  static world::DatasetSpec make_spec(std::size_t per_cell, std::uint64_t seed) {
    auto s = world::DatasetSpec::balanced(per_cell, 2, 5, seed);
    s.render.ad_shift_years = 30.0;
    return s;
  }
};

AdvConfig small_config(int k, std::size_t n) {
  AdvConfig c;
  c.k = k;
  c.n = n;
  c.train.learning_rate = 1e-3;
  c.seed = 3;
  return c;
}

world::Dataset one_sample(double age, Diagnosis dx) {
  world::SynthSample s;
  s.chron_age = age;
  s.diagnosis = dx;
  return {s};
}

double bce(double p, double y) {
  const double q = std::clamp(p, 1e-7, 1.0 - 1e-7);
  return y == 1.0 ? -std::log(q) : -std::log(1.0 - q);
}

}  // namespace

TEST(SelectHard, PicksLargestLosses) {
  const std::vector<double> losses{0.1, 0.9, 0.5};
  const std::vector<std::uint64_t> ids{0, 1, 2};
  EXPECT_EQ(rank_by_loss(losses, ids, 2), (std::vector<std::size_t>{1, 2}));
}

TEST(SelectHard, TiesBreakByAscendingId) {
  const std::vector<double> losses{0.5, 0.5, 0.5, 0.7};
  const std::vector<std::uint64_t> ids{9, 4, 6, 1};
  EXPECT_EQ(rank_by_loss(losses, ids, 3), (std::vector<std::size_t>{3, 1, 2}));
}

TEST(SelectHard, WholeDatasetWhenNIsSize) {
  const SmallWorld w(5);
  auto idx = select_hard(w.pretrained, w.splits.train, w.splits.train.size());
  std::sort(idx.begin(), idx.end());
  std::vector<std::size_t> all(w.splits.train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  EXPECT_EQ(idx, all);
}

TEST(SelectHard, MatchesSortOracle) {
  const auto s = world::sample_dataset(world::DatasetSpec::balanced(34, 0, 0, 7));
  ASSERT_GE(s.train.size(), 200u);
  const world::Dataset data(s.train.begin(), s.train.begin() + 200);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const models::Classifier c(256, {{8}}, seed);
    std::vector<std::pair<double, std::uint64_t>> scored;
    std::vector<std::size_t> pos_of_id(1000);
    for (std::size_t i = 0; i < data.size(); ++i) {
      scored.emplace_back(-bce(c.predict_one(data[i].image), data[i].label()), data[i].id);
      pos_of_id.at(data[i].id) = i;
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::size_t> oracle;
    for (std::size_t i = 0; i < 50; ++i) oracle.push_back(pos_of_id[scored[i].second]);
    EXPECT_EQ(select_hard(c, data, 50), oracle);
  }
}

TEST(SelectHard, PerClassSplitsEvenly) {
  const SmallWorld w(5);
  const auto idx = select_hard_per_class(w.pretrained, w.splits.train, 10);
  ASSERT_EQ(idx.size(), 10u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(w.splits.train[idx[i]].diagnosis, Diagnosis::CN);
  for (std::size_t i = 5; i < 10; ++i) EXPECT_EQ(w.splits.train[idx[i]].diagnosis, Diagnosis::AD);
}

TEST(InitAges, RealAge) {
  AdvConfig cfg;
  cfg.init = InitPolicy::RealAge;
  Rng rng(1);
  const AdvState st = init_target_ages(one_sample(72.3, Diagnosis::CN), {0}, cfg, rng);
  EXPECT_EQ(st.ages.front(), 72.3);
}

TEST(InitAges, UniformToMaxDegenerate) {
  Rng rng(2);
  const AdvState st = init_target_ages(one_sample(90.0, Diagnosis::AD), {0}, AdvConfig{}, rng);
  EXPECT_EQ(st.ages.front(), 90.0);
}

TEST(InitAges, UniformToMaxMean) {
  Rng rng(3);
  const AdvState st = init_target_ages(one_sample(60.0, Diagnosis::CN), std::vector<std::size_t>(10000, 0),
                                       AdvConfig{}, rng);
  const double mean = std::accumulate(st.ages.begin(), st.ages.end(), 0.0) / 10000.0;
  EXPECT_GE(mean, 74.0);
  EXPECT_LE(mean, 76.0);
  EXPECT_GE(*std::min_element(st.ages.begin(), st.ages.end()), 60.0);
  EXPECT_LE(*std::max_element(st.ages.begin(), st.ages.end()), 90.0);
}

TEST(InitAges, PerClassBounds) {
  AdvConfig cfg;
  cfg.bounds = AgeBounds::PerClass;
  cfg.init = InitPolicy::RealAge;
  world::Dataset d = one_sample(70.0, Diagnosis::AD);
  d.push_back(one_sample(80.0, Diagnosis::CN).front());
  Rng rng(4);
  const AdvState st = init_target_ages(d, {0, 1}, cfg, rng);
  EXPECT_EQ(st.lower, (std::vector<double>{70.0, 60.0}));
  EXPECT_EQ(st.upper, (std::vector<double>{90.0, 80.0}));
}

TEST(Ascend, YearsArithmetic) {
  EXPECT_DOUBLE_EQ(ascend_age(70.0, 2.0, 0.01, StepUnits::Years, 60.0, 90.0), 70.02);
}

TEST(Ascend, NormalizedUnitsScaleBySpanSquared) {
  // v = (a - 60) / 30, so dL/dv = 30 dL/da and a step of 0.01 in v-gradient
  // units moves a by 30 * 0.01 * 30 dL/da.
  EXPECT_DOUBLE_EQ(age_step(2.0, 0.01, StepUnits::Normalized), 18.0);
}

TEST(Ascend, ClipsToBounds) {
  EXPECT_EQ(ascend_age(89.999, 1e3, 0.01, StepUnits::Years, 60.0, 90.0), 90.0);
  EXPECT_EQ(ascend_age(60.001, -1e3, 0.01, StepUnits::Years, 60.0, 90.0), 60.0);
}

TEST(Ascend, StepFollowsGradientSign) {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double g = rng.normal(0.0, 1.0) * std::pow(10.0, rng.uniform(-8, 2));
    for (StepUnits u : {StepUnits::Years, StepUnits::Normalized}) {
      EXPECT_GE(g * age_step(g, rng.uniform(1e-4, 0.1), u), 0.0);
    }
    const double a = ascend_age(rng.uniform(60, 90), g, 0.01, StepUnits::Normalized, 60, 90);
    EXPECT_GE(a, 60.0);
    EXPECT_LE(a, 90.0);
  }
}

TEST(Synthesize, CountsLabelsAndIdentity) {
  const SmallWorld w;
  const auto src = select_hard(w.pretrained, w.splits.train, 12);
  AdvConfig cfg;
  cfg.init = InitPolicy::RealAge;
  Rng rng(6);
  const AdvState st = init_target_ages(w.splits.train, src, cfg, rng);
  const SynSet syn = synthesize(st, w.splits.train, w.g);
  ASSERT_EQ(syn.size(), 12u);
  for (std::size_t i = 0; i < syn.size(); ++i) {
    const auto& s = w.splits.train[src[i]];
    EXPECT_EQ(syn.labels[i], s.label());
    EXPECT_EQ(syn.source_ids[i], s.id);
    EXPECT_EQ(syn.images[i].buffer(), s.image.buffer());
  }
}

TEST(Game, AlgebraOverAFullRun) {
  const SmallWorld w;
  models::Classifier c = w.pretrained;
  const AdvConfig cfg = small_config(5, 20);
  const AdvResult r = adversarial_train(c, w.g, w.splits.train, cfg, &w.splits.val);
  ASSERT_EQ(r.ascents.size(), 5u);
  std::size_t steps = 0;
  for (const AscentRecord& a : r.ascents) {
    ASSERT_EQ(a.grad.size(), 20u);
    for (std::size_t i = 0; i < a.grad.size(); ++i) {
      EXPECT_GE(a.grad[i] * a.pre_clip_delta[i], 0.0);
      EXPECT_GE(a.ages[i], 60.0);
      EXPECT_LE(a.ages[i], 90.0);
      ++steps;
    }
  }
  EXPECT_EQ(steps, 100u);
  EXPECT_EQ(r.synthesized, 100u);
  EXPECT_EQ(r.history.size(), 5u);
  for (const auto& h : r.history) EXPECT_TRUE(h.val_accuracy.has_value());
  for (std::size_t i = 0; i < r.source_ids.size(); ++i) {
    const auto it = std::find_if(w.splits.train.begin(), w.splits.train.end(),
                                 [&](const auto& s) { return s.id == r.source_ids[i]; });
    EXPECT_EQ(it->diagnosis, r.source_diagnoses[i]);
  }
  std::ostringstream hist;
  write_history(hist, r);
  std::istringstream lines(hist.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("ages").size(), 20u);
    ++count;
  }
  EXPECT_EQ(count, 5);
}

TEST(Game, AgeGradientMatchesFiniteDifferences) {
  const SmallWorld w;
  const auto& s = w.splits.train[3];
  const models::Subject subj = models::subject_of(s);
  const test::TapeFn f = [&](ad::Tape&, const std::vector<ad::Var>& v) {
    const ad::Var img = w.g.generate(std::span(&subj, 1), v);
    return ad::bce_loss(w.pretrained.forward(img), ad::Tensor({1, 1}, s.label()));
  };
  const std::vector<ad::Tensor> x{ad::Tensor::scalar(74.0)};
  const auto analytic = test::analytic_grad(f, x);
  EXPECT_NE(analytic[0].item(), 0.0);
  EXPECT_LT(test::rel_error(analytic, test::numeric_grad(f, x)), 1e-6);
}

TEST(Game, ProposedBudgetIsKTimesN) {
  const SmallWorld w(20);
  models::Classifier c = w.pretrained;
  const AdvResult r = adversarial_train(c, w.g, w.splits.train, small_config(5, 100));
  EXPECT_EQ(r.synthesized, 500u);
}

TEST(Game, GeneratorStaysFrozen) {
  const SmallWorld w(5);
  const models::NeuralGenerator g(models::NeuralGeneratorConfig{{16}, {}}, 16, {}, 9);
  const auto before = g.net().params;
  models::Classifier c = w.pretrained;
  adversarial_train(c, g, w.splits.train, small_config(2, 8));
  EXPECT_EQ(g.net().params, before);
}

TEST(Game, ZeroIterationsLeaveClassifier) {
  const SmallWorld w(5);
  models::Classifier c = w.pretrained;
  const AdvResult r = adversarial_train(c, w.g, w.splits.train, small_config(0, 8));
  EXPECT_TRUE(c == w.pretrained);
  EXPECT_EQ(r.synthesized, 0u);
}

TEST(Game, FullStoreEqualsPlainGame) {
  const SmallWorld w;
  models::Classifier a = w.pretrained, b = w.pretrained;
  const AdvConfig cfg = small_config(3, 15);
  const AdvResult ra = adversarial_train(a, w.g, w.splits.train, cfg);
  const AdvResult rb = adversarial_train_with_store(b, w.g, w.splits.train, 100.0, cfg);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(ra.final_ages, rb.final_ages);
  EXPECT_EQ(ra.source_ids, rb.source_ids);
  EXPECT_TRUE(rb.warnings.empty());
}

TEST(Game, SmallStoreCutsN) {
  const SmallWorld w;
  models::Classifier c = w.pretrained;
  const AdvResult r = adversarial_train_with_store(c, w.g, w.splits.train, 5.0, small_config(2, 20));
  EXPECT_EQ(r.store_size, 3u);
  EXPECT_EQ(r.source_ids.size(), 3u);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Game, StoreIsSeededOrderedSubset) {
  const SmallWorld w;
  const auto a = make_store(w.splits.train, 20.0, 11);
  const auto b = make_store(w.splits.train, 20.0, 11);
  ASSERT_EQ(a.size(), 12u);
  EXPECT_EQ(world::fingerprint(a), world::fingerprint(b));
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LT(a[i - 1].id, a[i].id);
  EXPECT_THROW(make_store(w.splits.train, 0.0, 1), std::invalid_argument);
}

TEST(Game, NonFiniteLossAborts) {
  const SmallWorld w(5);
  models::Classifier c = w.pretrained;
  c.params()[0][0] = std::nan("");
  EXPECT_THROW(adversarial_train(c, w.g, w.splits.train, small_config(2, 8)), ad::NonFiniteError);
}

TEST(Game, ConfigValidationAndJson) {
  AdvConfig c;
  c.n = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AdvConfig{};
  c.step_size = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AdvConfig{};
  c.max_age = 95.0;
  EXPECT_THROW(c.validate(), ConfigError);
  nlohmann::json j = AdvConfig{};
  EXPECT_EQ(j.get<AdvConfig>().n, 100u);
  j["surprise"] = 1;
  EXPECT_THROW(j.get<AdvConfig>(), ConfigError);
}

TEST(UpdateClassifier, EmptySynSetIsOrdinaryEpoch) {
  const SmallWorld w(5);
  models::Classifier a = w.pretrained, b = w.pretrained;
  ad::AdamConfig ac;
  ac.learning_rate = 1e-3;
  ad::AdamState oa(ac), ob(ac);
  Rng ra(7), rb(7);
  update_classifier(a, oa, w.splits.train, SynSet{}, 8, ra);
  models::train_epoch(b, ob, models::examples_of(w.splits.train), 8, rb);
  EXPECT_TRUE(a == b);
}

TEST(UpdateClassifier, LowersLossOnSyntheticSet) {
  const SmallWorld w;
  const auto src = select_hard(w.pretrained, w.splits.train, 20);
  Rng rng(8);
  const AdvState st = init_target_ages(w.splits.train, src, AdvConfig{}, rng);
  const SynSet syn = synthesize(st, w.splits.train, w.g);
  std::vector<models::Example> ex;
  for (std::size_t i = 0; i < syn.size(); ++i) ex.push_back({&syn.images[i], syn.labels[i]});
  models::Classifier c = w.pretrained;
  const double before = models::mean_loss(c, ex);
  ad::AdamConfig ac;
  ac.learning_rate = 1e-3;
  ad::AdamState opt(ac);
  Rng shuffle(9);
  for (int e = 0; e < 3; ++e) update_classifier(c, opt, w.splits.train, syn, 16, shuffle);
  EXPECT_LT(models::mean_loss(c, ex), before);
}

TEST(Baselines, NamesRoundTrip) {
  for (auto k : {BaselineKind::Naive, BaselineKind::RSRS, BaselineKind::HSRS, BaselineKind::RSAT, BaselineKind::JTT,
                 BaselineKind::ConvAug, BaselineKind::MaxUp}) {
    EXPECT_EQ(parse_baseline(baseline_name(k)), k);
  }
  EXPECT_FALSE(parse_baseline("proposed").has_value());
}

TEST(Baselines, RandomSynthesisBudgetAndBounds) {
  const SmallWorld w(20);
  BaselineContext ctx;
  ctx.pretrained = &w.pretrained;
  ctx.generator = &w.g;
  ctx.pool = &w.splits.train;
  ctx.adv = small_config(5, 100);
  for (auto kind : {BaselineKind::RSRS, BaselineKind::HSRS}) {
    const BaselineResult r = run_baseline(kind, ctx);
    EXPECT_EQ(r.synthesized, 500u);
    EXPECT_EQ(r.selected, 100u);
    EXPECT_FALSE(r.classifier == w.pretrained);
  }
  const std::vector<std::size_t> src{0, 1, 2};
  Rng rng(10);
  const SynSet syn = random_synthesis(src, w.splits.train, w.g, ctx.adv, 5, rng);
  ASSERT_EQ(syn.size(), 15u);
  for (std::size_t i = 0; i < syn.size(); ++i) {
    EXPECT_GE(syn.target_ages[i], 60.0);
    EXPECT_LE(syn.target_ages[i], 90.0);
    EXPECT_EQ(syn.labels[i], w.splits.train[i / 5].label());
  }
}

TEST(Baselines, NaiveIsPretrained) {
  const SmallWorld w(5);
  BaselineContext ctx;
  ctx.pretrained = &w.pretrained;
  ctx.pool = &w.splits.train;
  EXPECT_TRUE(run_baseline(BaselineKind::Naive, ctx).classifier == w.pretrained);
}

TEST(Baselines, JttWithoutErrorsIsNoOp) {
  // Every pool sample is AD and the classifier always says AD.
  const SmallWorld w(5);
  world::Dataset pool;
  for (const auto& s : w.splits.train) {
    if (s.diagnosis == Diagnosis::AD) pool.push_back(s);
  }
  models::Classifier c = w.pretrained;
  auto& p = c.params();
  p[p.size() - 2] = ad::Tensor(p[p.size() - 2].shape());
  p.back() = ad::Tensor(p.back().shape(), 10.0);
  std::size_t errors = 99;
  const auto up = jtt_upsample(c, pool, 3, &errors);
  EXPECT_EQ(errors, 0u);
  ASSERT_EQ(up.size(), pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) EXPECT_EQ(up[i].image, &pool[i].image);
}

TEST(Baselines, JttRepeatsErrors) {
  const SmallWorld w(5);
  models::Classifier c = w.pretrained;
  auto& p = c.params();
  p[p.size() - 2] = ad::Tensor(p[p.size() - 2].shape());
  p.back() = ad::Tensor(p.back().shape(), -10.0);  // always CN
  std::size_t errors = 0;
  const auto up = jtt_upsample(c, w.splits.train, 3, &errors);
  EXPECT_EQ(errors, w.splits.train.size() / 2);
  EXPECT_EQ(up.size(), w.splits.train.size() + 2 * errors);
}

TEST(Baselines, MaxUpWithIdenticalCandidatesIsPlainStep) {
  const SmallWorld w(5);
  models::Classifier a = w.pretrained, b = w.pretrained;
  const auto ex = models::examples_of(w.splits.train);
  const std::vector<models::Example> batch(ex.begin(), ex.begin() + 8);
  std::vector<std::vector<ad::Tensor>> cands;
  std::vector<const ad::Tensor*> rows;
  ad::Tensor labels({8, 1});
  for (std::size_t i = 0; i < 8; ++i) {
    cands.emplace_back(4, *batch[i].image);
    rows.push_back(batch[i].image);
    labels[i] = batch[i].label;
  }
  ad::AdamConfig ac;
  ac.learning_rate = 1e-3;
  ad::AdamState oa(ac), ob(ac);
  const double la = maxup_step(a, oa, batch, cands);
  const double lb = models::train_step(b, ob, models::stack_rows(rows), labels);
  EXPECT_EQ(la, lb);
  EXPECT_TRUE(a == b);
}

TEST(Baselines, ParamsJsonIsStrict) {
  nlohmann::json j = BaselineParams{};
  EXPECT_EQ(j.get<BaselineParams>().lambda_up, 2u);
  j["aug_ops"] = {"rotate", "warp"};
  EXPECT_THROW(j.get<BaselineParams>(), ConfigError);
}

TEST(GeneratorGame, ZeroEpochsKeepsPostDistillFidelity) {
  const SmallWorld w(5);
  models::NeuralGenerator g(models::NeuralGeneratorConfig{}, 16, {}, 12);
  models::DistillConfig dc;
  dc.steps = 1000;
  dc.seed = 13;
  models::distill_generator(g, w.g, dc);
  const auto before = g.net().params;
  GeneratorGameConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 14;
  models::Classifier c = w.pretrained;
  const GeneratorGameResult r = train_generator_adversarial(g, w.g, c, w.splits.train, cfg);
  ASSERT_EQ(r.fidelity.size(), 1u);
  const auto set = models::sample_fidelity_set(g.ranges(), cfg.fidelity_samples, cfg.seed);
  EXPECT_EQ(r.fidelity[0], models::fidelity_mse(g, w.g, set));
  EXPECT_LT(r.fidelity[0], 0.01);
  EXPECT_EQ(g.net().params, before);
  EXPECT_TRUE(c == w.pretrained);
}

TEST(GeneratorGame, OneEpochChangesGeneratorAndRecordsTrace) {
  const SmallWorld w(5);
  models::NeuralGenerator g(models::NeuralGeneratorConfig{{16}, {}}, 16, {}, 15);
  const auto before = g.net().params;
  GeneratorGameConfig cfg;
  cfg.epochs = 1;
  cfg.synth_per_epoch = 10;
  cfg.seed = 16;
  models::Classifier c = w.pretrained;
  const GeneratorGameResult r = train_generator_adversarial(g, w.g, c, w.splits.train, cfg);
  EXPECT_EQ(r.fidelity.size(), 2u);
  EXPECT_EQ(r.g_loss.size(), 1u);
  EXPECT_EQ(r.synthesized, 10u);
  EXPECT_NE(g.net().params, before);
}
