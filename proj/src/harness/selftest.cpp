#include "advcf/harness/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "advcf/augment/game.hpp"
#include "advcf/autodiff/gradcheck.hpp"
#include "advcf/encoding/fourier.hpp"

namespace advcf::harness {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

ad::Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  ad::Tensor t(std::move(shape));
  for (double& v : t.buffer()) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero so relu is differentiable at every entry.
ad::Tensor away_from_zero(ad::Shape shape, Rng& rng) {
  ad::Tensor t(std::move(shape));
  for (double& v : t.buffer()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
  return t;
}

// Scalar summary with non-uniform weights so every output entry matters.
ad::Var project(const ad::Var& v, std::uint64_t seed) {
  Rng rng(seed);
  return ad::mean(ad::mul(v, v.tape().constant(random_tensor(v.shape(), rng))));
}

world::Dataset small_world(std::size_t per_cell, std::uint64_t seed, world::DatasetSpec* spec_out = nullptr) {
  auto spec = world::DatasetSpec::balanced(per_cell, 0, 0, seed);
  if (spec_out) *spec_out = spec;
  return world::sample_dataset(spec).train;
}

}  // namespace

CriterionResult gradient_suite(std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(seed, "selftest"));
  struct Case {
    std::string name;
    ad::ScalarFn f;
    std::vector<ad::Tensor> inputs;
    double tol;
    std::size_t coords;
  };
  std::vector<Case> cases;
  cases.push_back({"add", [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::add(x[0], x[1]), 1); },
                   {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}, 1e-6, 0});
  cases.push_back({"add_broadcast",
                   [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::add(x[0], x[1]), 2); },
                   {random_tensor({3, 4}, rng), random_tensor({}, rng)}, 1e-6, 0});
  cases.push_back({"mul", [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::mul(x[0], x[1]), 3); },
                   {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}, 1e-6, 0});
  cases.push_back({"mul_broadcast",
                   [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::mul(x[0], x[1]), 4); },
                   {random_tensor({}, rng), random_tensor({2, 5}, rng)}, 1e-6, 0});
  cases.push_back({"sub", [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::sub(x[0], x[1]), 5); },
                   {random_tensor({4}, rng), random_tensor({4}, rng)}, 1e-6, 0});
  cases.push_back({"matmul", [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::matmul(x[0], x[1]), 6); },
                   {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)}, 1e-6, 0});
  cases.push_back({"matmul_vector",
                   [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::matmul(x[0], x[1]), 7); },
                   {random_tensor({4}, rng), random_tensor({4, 3}, rng)}, 1e-6, 0});
  cases.push_back({"relu", [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::relu(x[0]), 8); },
                   {away_from_zero({3, 5}, rng)}, 1e-6, 0});
  cases.push_back({"sigmoid", [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::sigmoid(x[0]), 9); },
                   {random_tensor({3, 5}, rng, -4, 4)}, 1e-6, 0});
  cases.push_back({"sin", [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::sin(x[0]), 10); },
                   {random_tensor({6}, rng, -3, 3)}, 1e-6, 0});
  cases.push_back({"cos", [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::cos(x[0]), 11); },
                   {random_tensor({6}, rng, -3, 3)}, 1e-6, 0});
  cases.push_back({"mean", [](ad::Tape&, std::span<const ad::Var> x) { return ad::mean(ad::mul(x[0], x[0])); },
                   {random_tensor({2, 3}, rng)}, 1e-6, 0});
  cases.push_back({"concat_axis0",
                   [](ad::Tape&, std::span<const ad::Var> x) {
                     return project(ad::concat(x, 0), 12);
                   },
                   {random_tensor({2, 3}, rng), random_tensor({1, 3}, rng)}, 1e-6, 0});
  cases.push_back({"concat_axis1",
                   [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::concat(x, 1), 13); },
                   {random_tensor({2, 3}, rng), random_tensor({2, 2}, rng)}, 1e-6, 0});
  cases.push_back({"concat_interleave",
                   [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::concat(x, 1, true), 14); },
                   {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}, 1e-6, 0});
  cases.push_back({"affine_scale_shift",
                   [](ad::Tape&, std::span<const ad::Var> x) {
                     return project(ad::affine_scale_shift(x[0], -2.5, 0.75), 15);
                   },
                   {random_tensor({5}, rng)}, 1e-6, 0});
  cases.push_back({"reshape",
                   [](ad::Tape&, std::span<const ad::Var> x) { return project(ad::reshape(x[0], {3, 2}), 16); },
                   {random_tensor({2, 3}, rng)}, 1e-6, 0});
  {
    ad::Tensor labels({6, 1});
    for (std::size_t i = 0; i < 6; ++i) labels[i] = static_cast<double>(i % 2);
    cases.push_back({"bce_loss",
                     [labels](ad::Tape&, std::span<const ad::Var> x) { return ad::bce_loss(x[0], labels); },
                     {random_tensor({6, 1}, rng, 0.05, 0.95)}, 1e-6, 0});
  }
  {
    const auto encoder = enc::FourierEncoder({100, 2, 10.0, derive_seed(seed, "encoder")});
    cases.push_back({"fourier_encoding",
                     [encoder](ad::Tape&, std::span<const ad::Var> x) { return project(encoder.encode(x[0]), 17); },
                     {random_tensor({3, 2}, rng, 0.0, 0.99)}, 1e-6, 0});
  }
  {
    world::RenderConfig rc;
    world::MorphLatent latent = world::sample_latent({}, rng);
    for (Diagnosis dx : {Diagnosis::CN, Diagnosis::AD}) {
      cases.push_back({std::string("render_age_") + std::string(diagnosis_name(dx)),
                       [rc, latent, dx](ad::Tape& tape, std::span<const ad::Var> x) {
                         return project(world::render(tape, latent, x[0], dx, rc), 18);
                       },
                       {ad::Tensor::scalar(rng.uniform(62.0, 88.0))}, 1e-5, 0});
    }
  }
  {
    // Full classifier: input pixels and a random subset of the weights.
    const models::Classifier c(256, {}, derive_seed(seed, "init"));
    ad::Tensor labels({4, 1});
    for (std::size_t i = 0; i < 4; ++i) labels[i] = static_cast<double>(i % 2);
    std::vector<ad::Tensor> inputs = c.params();
    inputs.push_back(random_tensor({4, 256}, rng));
    cases.push_back({"classifier_backward",
                     [labels](ad::Tape&, std::span<const ad::Var> x) {
                       const std::span<const ad::Var> params = x.first(x.size() - 1);
                       return ad::bce_loss(ad::sigmoid(models::mlp_forward(x.back(), params)), labels);
                     },
                     inputs, 1e-6, 400});
  }
  {
    models::NeuralGeneratorConfig gc;
    gc.encoder.seed = derive_seed(seed, "encoder");
    const models::NeuralGenerator g(gc, 16, {}, derive_seed(seed, "init"));
    std::vector<models::Subject> subjects;
    for (int i = 0; i < 2; ++i) subjects.push_back({world::sample_latent({}, rng), static_cast<Diagnosis>(i)});
    std::vector<ad::Tensor> inputs = g.net().params;
    inputs.push_back(ad::Tensor::scalar(rng.uniform(62.0, 88.0)));
    inputs.push_back(ad::Tensor::scalar(rng.uniform(62.0, 88.0)));
    cases.push_back({"generator_backward",
                     [g, subjects](ad::Tape&, std::span<const ad::Var> x) {
                       const std::span<const ad::Var> params = x.first(x.size() - 2);
                       return project(g.generate_with(subjects, x.last(2), params), 19);
                     },
                     inputs, 1e-6, 400});
  }

  std::string worst_name;
  double worst_ratio = 0.0;
  bool ok = true;
  std::string failures;
  for (const auto& c : cases) {
    const ad::GradCheck r = ad::check_gradient(c.f, c.inputs, 1e-5, c.coords, derive_seed(seed, c.name));
    const bool pass = r.rel_error < c.tol;
    if (!pass) {
      ok = false;
      failures += " " + c.name + "=" + sci(r.rel_error);
    }
    if (r.rel_error / c.tol >= worst_ratio) {
      worst_ratio = r.rel_error / c.tol;
      worst_name = c.name + " " + sci(r.rel_error);
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 10.0;
  return {1, "gradient suite", ok,
          std::to_string(cases.size()) + " checks, worst " + worst_name + ", " + sci(secs) + " s (limit 10)" +
              (failures.empty() ? "" : "; failed:" + failures)};
}

CriterionResult encoding_invariants(std::uint64_t seed) {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(seed, "selftest"));
  const enc::FourierEncoder encoder({100, 2, 10.0, derive_seed(seed, "encoder")});
  double norm_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const ad::Tensor v = random_tensor({2}, rng, 0.0, 1.0);
    const ad::Tensor g = encoder.encode(v);
    double s = 0.0;
    for (double x : g.data()) s += x * x;
    norm_err = std::max(norm_err, std::abs(s - static_cast<double>(encoder.m())));
  }
  // d gamma / d v0 from the closed form against reverse mode, per feature.
  double deriv_err = 0.0;
  const double two_pi = 2.0 * std::acos(-1.0);
  const auto& basis = encoder.basis();
  for (int trial = 0; trial < 20; ++trial) {
    const ad::Tensor v = random_tensor({2}, rng, 0.0, 1.0);
    for (std::size_t j = 0; j < encoder.m(); ++j) {
      const double phase = two_pi * (basis.at(j, 0) * v[0] + basis.at(j, 1) * v[1]);
      const double p = encoder.coefficients()[j];
      const double closed[2] = {-p * std::sin(phase) * two_pi * basis.at(j, 0),
                                p * std::cos(phase) * two_pi * basis.at(j, 0)};
      for (int part = 0; part < 2; ++part) {
        ad::Tape tape;
        const ad::Var vin = tape.param(v);
        const ad::Var out = encoder.encode(vin);
        ad::Tensor pick({2 * encoder.m()});
        pick[2 * j + static_cast<std::size_t>(part)] = 1.0;
        const ad::Var sel = ad::affine_scale_shift(ad::mean(ad::mul(out, tape.constant(pick))),
                                                   static_cast<double>(2 * encoder.m()), 0.0);
        const double auto_d = ad::backward(tape, sel).of(vin)[0];
        deriv_err = std::max(deriv_err, std::abs(auto_d - closed[part]) / std::max(1.0, std::abs(closed[part])));
      }
    }
  }
  const double secs = seconds_since(t0);
  return {2, "encoding invariants", norm_err < 1e-9 && deriv_err < 1e-10 && secs < 1.0,
          "max | ||gamma||^2 - m | = " + sci(norm_err) + " (limit 1e-9), closed-form derivative error " +
              sci(deriv_err) + " (limit 1e-10), " + sci(secs) + " s"};
}

CriterionResult game_algebra(std::uint64_t seed) {
  world::DatasetSpec spec;
  const world::Dataset train = small_world(60, derive_seed(seed, "data"), &spec);
  const models::AnalyticGenerator g(spec.render);
  models::Classifier c(spec.render.size * spec.render.size, {}, derive_seed(seed, "init"));
  models::TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.epochs = 10;
  tc.seed = derive_seed(seed, "shuffle");
  models::pretrain_classifier(c, train, tc);
  aug::AdvConfig cfg;
  cfg.seed = derive_seed(seed, "adv");
  cfg.train.learning_rate = 1e-3;
  cfg.verify_selection = true;
  const aug::AdvResult r = aug::adversarial_train(c, g, train, cfg);
  std::size_t steps = 0, sign_ok = 0, bounds_ok = 0;
  for (const auto& a : r.ascents) {
    for (std::size_t i = 0; i < a.grad.size(); ++i) {
      ++steps;
      sign_ok += a.grad[i] * a.pre_clip_delta[i] >= 0.0;
      bounds_ok += a.ages[i] >= kMinAge && a.ages[i] <= kMaxAge;
    }
  }
  const bool ok = steps == static_cast<std::size_t>(cfg.k) * cfg.n && sign_ok == steps && bounds_ok == steps;
  return {3, "game algebra", ok,
          std::to_string(sign_ok) + "/" + std::to_string(steps) + " ascent steps with grad*delta >= 0, " +
              std::to_string(bounds_ok) + "/" + std::to_string(steps) + " ages in [60, 90]"};
}

CriterionResult oracle_equivalences(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "selftest"));
  // Hard selection vs a full sort on (loss desc, id asc). Losses are drawn
  // from a coarse grid so ties are common.
  std::size_t select_ok = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t size = 1 + rng.index(200);
    const std::size_t n = 1 + rng.index(size);
    std::vector<double> losses(size);
    std::vector<std::uint64_t> ids(size);
    for (std::size_t i = 0; i < size; ++i) {
      losses[i] = static_cast<double>(rng.index(20)) * 0.25;
      ids[i] = rng.next() % 1000;
    }
    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (losses[a] != losses[b]) return losses[a] > losses[b];
      if (ids[a] != ids[b]) return ids[a] < ids[b];
      return a < b;
    });
    order.resize(n);
    const auto got = aug::rank_by_loss(losses, ids, n);
    // Equal (loss, id) pairs are interchangeable, so compare the keys.
    bool same = got.size() == order.size();
    for (std::size_t k = 0; same && k < n; ++k) {
      same = losses[got[k]] == losses[order[k]] && ids[got[k]] == ids[order[k]];
    }
    select_ok += same;
  }

  world::DatasetSpec spec;
  const world::Dataset train = small_world(40, derive_seed(seed, "data"), &spec);
  const models::AnalyticGenerator g(spec.render);
  models::Classifier base(spec.render.size * spec.render.size, {}, derive_seed(seed, "init"));
  aug::AdvConfig cfg;
  cfg.seed = derive_seed(seed, "adv");
  cfg.train.learning_rate = 1e-3;
  models::Classifier a = base, b = base;
  const auto ra = aug::adversarial_train(a, g, train, cfg);
  const auto rb = aug::adversarial_train_with_store(b, g, train, 100.0, cfg);
  const bool store_same = a == b && ra.final_ages == rb.final_ages && ra.source_ids == rb.source_ids;

  std::size_t render_ok = 0;
  const int renders = 50;
  for (int i = 0; i < renders; ++i) {
    const world::MorphLatent l = world::sample_latent(spec.latents, rng);
    const double age = rng.uniform(kMinAge, kMaxAge);
    const double delta = spec.render.ad_shift_years;
    render_ok += world::render(l, age, Diagnosis::AD, spec.render) == world::render(l, age + delta, Diagnosis::CN, spec.render);
  }
  const bool ok = select_ok == 100 && store_same && render_ok == renders;
  return {4, "oracle equivalences", ok,
          "selection " + std::to_string(select_ok) + "/100, store M=100 " + (store_same ? "identical" : "differs") +
              ", render AD/CN " + std::to_string(render_ok) + "/" + std::to_string(renders)};
}

std::vector<CriterionResult> selftest(std::uint64_t seed) {
  return {gradient_suite(seed), encoding_invariants(seed), game_algebra(seed), oracle_equivalences(seed)};
}

}  // namespace advcf::harness
