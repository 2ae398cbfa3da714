#include "advcf/models/generator.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "advcf/json_util.hpp"
#include "advcf/random.hpp"

namespace advcf::models {
namespace {

void check_batch(std::span<const Subject> subjects, std::span<const ad::Var> ages) {
  if (subjects.empty()) throw std::invalid_argument("generate: empty batch");
  if (subjects.size() != ages.size()) {
    throw std::invalid_argument("generate: " + std::to_string(subjects.size()) + " subjects but " +
                                std::to_string(ages.size()) + " ages");
  }
  ad::Tape& tape = ages.front().tape();
  for (const ad::Var& a : ages) {
    if (&a.tape() != &tape) throw std::invalid_argument("generate: ages must share one tape");
    if (a.value().numel() != 1) throw ad::ShapeError("generate: each age must be a single value");
  }
}

double rescale(double x, double lo, double hi) { return hi > lo ? 2.0 * (x - lo) / (hi - lo) - 1.0 : 0.0; }

}  // namespace

Subject subject_of(const world::SynthSample& s) { return {s.latent, s.diagnosis}; }

ad::Tensor Generator::generate(std::span<const Subject> subjects, std::span<const double> ages) const {
  if (subjects.size() != ages.size()) throw std::invalid_argument("generate: subjects and ages differ in length");
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(ages.size());
  for (double a : ages) vars.push_back(tape.constant(ad::Tensor::scalar(a)));
  return generate(subjects, vars).value();
}

ad::Tensor Generator::generate_one(const Subject& subject, double age) const {
  const double a[] = {age};
  return generate(std::span(&subject, 1), a);
}

ad::Var AnalyticGenerator::generate(std::span<const Subject> subjects, std::span<const ad::Var> ages) const {
  check_batch(subjects, ages);
  ad::Tape& tape = ages.front().tape();
  const std::size_t dim = image_dim();
  std::vector<ad::Var> rows;
  rows.reserve(subjects.size());
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const ad::Var img = world::render(tape, subjects[i].latent, ages[i], subjects[i].diagnosis, cfg_);
    rows.push_back(ad::reshape(img, {1, dim}));
  }
  return rows.size() == 1 ? rows.front() : ad::concat(rows, 0);
}

void to_json(nlohmann::json& j, const NeuralGeneratorConfig& c) {
  j = {{"hidden", c.hidden},
       {"fourier_m", c.encoder.m},
       {"fourier_scale", c.encoder.scale},
       {"encoder_seed", c.encoder.seed}};
}

void from_json(const nlohmann::json& j, NeuralGeneratorConfig& c) {
  require_keys(j, {"hidden", "fourier_m", "fourier_scale", "encoder_seed"}, "generator");
  read_opt(j, "hidden", c.hidden);
  read_opt(j, "fourier_m", c.encoder.m);
  read_opt(j, "fourier_scale", c.encoder.scale);
  read_opt(j, "encoder_seed", c.encoder.seed);
  c.encoder.d = 2;
  if (c.encoder.m == 0 || !(c.encoder.scale > 0.0)) throw ConfigError("generator: fourier_m and scale must be positive");
}

NeuralGenerator::NeuralGenerator(const NeuralGeneratorConfig& cfg, std::size_t image_size,
                                 const world::LatentRanges& ranges, std::uint64_t init_seed)
    : cfg_(cfg), image_size_(image_size), ranges_(ranges), encoder_(cfg.encoder) {
  if (cfg.encoder.d != 2) throw std::invalid_argument("generator conditioning is (age, diagnosis): d must be 2");
  std::vector<std::size_t> widths{encoder_.output_dim() + 4};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(image_dim());
  Rng rng(init_seed);
  net_ = Mlp::glorot(std::move(widths), rng);
}

std::array<double, 4> NeuralGenerator::features(const world::MorphLatent& l) const {
  return {rescale(l.ventricle_base_radius, ranges_.ventricle_min, ranges_.ventricle_max),
          rescale(l.cortex_outer_radius, ranges_.cortex_min, ranges_.cortex_max),
          rescale(l.center_offset_x, -ranges_.offset_max, ranges_.offset_max),
          rescale(l.center_offset_y, -ranges_.offset_max, ranges_.offset_max)};
}

ad::Var NeuralGenerator::generate(std::span<const Subject> subjects, std::span<const ad::Var> ages) const {
  check_batch(subjects, ages);
  const auto params = net_.bind(ages.front().tape(), false);
  return generate_with(subjects, ages, params);
}

ad::Var NeuralGenerator::generate_with(std::span<const Subject> subjects, std::span<const ad::Var> ages,
                                       std::span<const ad::Var> params) const {
  check_batch(subjects, ages);
  ad::Tape& tape = ages.front().tape();
  const std::size_t n = subjects.size();

  // Normalized age per row; the upper end is held just below 1 like the
  // scalar normalization, with unit slope kept for the gradient.
  std::vector<ad::Var> age_rows;
  age_rows.reserve(n);
  for (const ad::Var& a : ages) {
    const double raw = enc::normalized_age(a.value().item());
    const double shift = -kMinAge / kAgeSpan + std::min(0.0, enc::kNormalizedCeiling - raw);
    age_rows.push_back(ad::reshape(ad::affine_scale_shift(a, 1.0 / kAgeSpan, shift), {1, 1}));
  }
  ad::Tensor codes({n, 1});
  ad::Tensor feats({n, 4});
  for (std::size_t i = 0; i < n; ++i) {
    codes[i] = enc::kDiagnosisCode[static_cast<int>(subjects[i].diagnosis)];
    const auto f = features(subjects[i].latent);
    std::copy(f.begin(), f.end(), feats.data().begin() + static_cast<std::ptrdiff_t>(4 * i));
  }
  const ad::Var age_col = n == 1 ? age_rows.front() : ad::concat(age_rows, 0);
  const ad::Var v_parts[] = {age_col, tape.constant(codes)};
  const ad::Var v = ad::concat(v_parts, 1);
  const ad::Var in_parts[] = {encoder_.encode(v), tape.constant(feats)};
  const ad::Var z = mlp_forward(ad::concat(in_parts, 1), params);
  // tanh(z) = 2 sigmoid(2z) - 1
  return ad::affine_scale_shift(ad::sigmoid(ad::affine_scale_shift(z, 2.0, 0.0)), 2.0, -1.0);
}

void to_json(nlohmann::json& j, const DistillConfig& c) {
  j = {{"steps", c.steps},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"decay", c.decay},
       {"validation_samples", c.validation_samples},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DistillConfig& c) {
  require_keys(j, {"steps", "batch_size", "learning_rate", "decay", "validation_samples", "seed"}, "distill");
  read_opt(j, "steps", c.steps);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "decay", c.decay);
  read_opt(j, "validation_samples", c.validation_samples);
  read_opt(j, "seed", c.seed);
  if (c.steps < 0 || c.batch_size == 0 || !(c.learning_rate > 0.0) || c.validation_samples == 0) {
    throw ConfigError("distill: steps >= 0, batch size, learning rate and validation size must be positive");
  }
}

namespace {

void draw_pairs(const world::LatentRanges& ranges, std::size_t n, Rng& rng, FidelitySet& out) {
  for (std::size_t i = 0; i < n; ++i) {
    Subject s;
    s.latent = world::sample_latent(ranges, rng);
    s.diagnosis = static_cast<Diagnosis>(i % 2);
    out.subjects.push_back(s);
    out.ages.push_back(rng.uniform(kMinAge, kMaxAge));
  }
}

}  // namespace

FidelitySet sample_fidelity_set(const world::LatentRanges& ranges, std::size_t n, std::uint64_t seed) {
  FidelitySet set;
  Rng rng(derive_seed(seed, "fidelity"));
  draw_pairs(ranges, n, rng, set);
  return set;
}

double fidelity_mse(const Generator& g, const Generator& oracle, const FidelitySet& set) {
  if (set.subjects.empty()) throw std::invalid_argument("fidelity set is empty");
  const ad::Tensor a = g.generate(set.subjects, set.ages);
  const ad::Tensor b = oracle.generate(set.subjects, set.ages);
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.numel());
}

DistillReport distill_generator(NeuralGenerator& g, const AnalyticGenerator& oracle, const DistillConfig& cfg) {
  if (g.image_dim() != oracle.image_dim()) throw ad::ShapeError("distill: generator and oracle image sizes differ");
  const FidelitySet val = sample_fidelity_set(g.ranges(), cfg.validation_samples, cfg.seed);
  DistillReport report;
  report.initial_mse = fidelity_mse(g, oracle, val);

  ad::AdamConfig acfg;
  acfg.learning_rate = cfg.learning_rate;
  acfg.decay = cfg.decay;
  ad::AdamState opt(acfg);
  Rng rng(derive_seed(cfg.seed, "distill"));
  for (int step = 0; step < cfg.steps; ++step) {
    FidelitySet batch;
    draw_pairs(g.ranges(), cfg.batch_size, rng, batch);
    // Diagnoses alternate inside draw_pairs; shuffle them so batches of odd
    // size are not biased towards CN.
    for (Subject& s : batch.subjects) s.diagnosis = rng.uniform() < 0.5 ? Diagnosis::CN : Diagnosis::AD;
    const ad::Tensor target = oracle.generate(batch.subjects, batch.ages);

    ad::Tape tape;
    const auto params = g.net().bind(tape, true);
    std::vector<ad::Var> ages;
    for (double a : batch.ages) ages.push_back(tape.constant(ad::Tensor::scalar(a)));
    const ad::Var out = g.generate_with(batch.subjects, ages, params);
    const ad::Var diff = ad::sub(out, tape.constant(target));
    ad::Var loss;
    try {
      loss = ad::mean(ad::mul(diff, diff));
    } catch (const ad::NonFiniteError& e) {
      throw ad::NonFiniteError("distillation diverged at step " + std::to_string(step) + ": " + e.what());
    }
    const ad::Gradients grads = ad::backward(tape, loss);
    std::vector<ad::Tensor> gs;
    gs.reserve(params.size());
    for (const auto& p : params) gs.push_back(grads.of(p));
    ad::adam_step(g.net().params, gs, opt);
    report.step_loss.push_back(loss.value().item());
  }
  report.final_mse = fidelity_mse(g, oracle, val);
  return report;
}

}  // namespace advcf::models
