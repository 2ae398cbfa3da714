#include "advcf/synthworld/render.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "advcf/random.hpp"

namespace advcf::world {
namespace {

// Intensity levels before the global 0.97 scale: background -1, white matter
// 0.4, cortex 1.0, ventricle -0.6.
constexpr double kScale = 0.97;
constexpr double kOuterWeight = 2.0;
constexpr double kInnerWeight = -0.6;
constexpr double kVentricleWeight = -1.0;

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Distance of each pixel center to the subject's center, in image-width units.
ad::Tensor pixel_radius(const MorphLatent& latent, std::size_t n) {
  ad::Tensor r({n, n});
  const double cx = 0.5 + latent.center_offset_x;
  const double cy = 0.5 + latent.center_offset_y;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double x = (static_cast<double>(j) + 0.5) / static_cast<double>(n) - cx;
      const double y = (static_cast<double>(i) + 0.5) / static_cast<double>(n) - cy;
      r.at(i, j) = std::sqrt(x * x + y * y);
    }
  }
  return r;
}

double base_thickness(const MorphLatent& latent) {
  return kCortexThicknessFraction * (latent.cortex_outer_radius - latent.ventricle_base_radius);
}

}  // namespace

void validate(const RenderConfig& cfg) {
  if (!(cfg.edge_softness > 0.0)) throw std::invalid_argument("edge softness must be positive");
  if (cfg.size < 2) throw std::invalid_argument("image size must be at least 2");
  if (cfg.noise_amplitude < 0.0 || cfg.noise_amplitude > 0.03) {
    throw std::invalid_argument("noise amplitude must lie in [0, 0.03]");
  }
}

void validate(const MorphLatent& l) {
  if (!(l.ventricle_base_radius > 0.0 && l.ventricle_base_radius < l.cortex_outer_radius &&
        l.cortex_outer_radius < 0.5)) {
    throw std::invalid_argument("latent radii must satisfy 0 < ventricle < cortex < 0.5");
  }
}

double effective_age(double age, Diagnosis dx, const RenderConfig& cfg) {
  return age + (dx == Diagnosis::AD ? cfg.ad_shift_years : 0.0);
}

Geometry geometry(const MorphLatent& latent, double age, Diagnosis dx, const RenderConfig& cfg) {
  const double t = (effective_age(age, dx, cfg) - kMinAge) / kAgeSpan;
  const double th0 = base_thickness(latent);
  const double rv = latent.ventricle_base_radius * (1.0 + cfg.ventricle_growth * t);
  const double th = th0 * (1.0 - cfg.cortex_thinning * t);
  return {rv, latent.cortex_outer_radius - th, latent.cortex_outer_radius};
}

ad::Tensor texture_noise(const MorphLatent& latent, const RenderConfig& cfg) {
  ad::Tensor noise({cfg.size, cfg.size});
  Rng rng(mix64(latent.texture_seed));
  for (double& v : noise.buffer()) v = rng.uniform(-cfg.noise_amplitude, cfg.noise_amplitude);
  return noise;
}

ad::Var render(ad::Tape& tape, const MorphLatent& latent, const ad::Var& age, Diagnosis dx, const RenderConfig& cfg) {
  validate(cfg);
  validate(latent);
  const double a = age.value().item();
  if (!(a >= kRenderMinAge && a <= kRenderMaxAge)) {
    throw std::out_of_range("render age " + std::to_string(a) + " outside [55, 100]");
  }
  const std::size_t n = cfg.size;
  const double inv_tau = 1.0 / cfg.edge_softness;
  const ad::Tensor r = pixel_radius(latent, n);

  ad::Tensor neg_r(r.shape());
  ad::Tensor fixed(r.shape());
  const ad::Tensor noise = texture_noise(latent, cfg);
  for (std::size_t i = 0; i < r.numel(); ++i) {
    neg_r[i] = -r[i];
    const double outer = logistic((latent.cortex_outer_radius - r[i]) * inv_tau);
    fixed[i] = kScale * (-1.0 + kOuterWeight * outer) + noise[i];
  }

  // Two separate affine steps keep render(s, a, AD) == render(s, a + shift, CN)
  // exact in floating point: both paths see the same effective age value.
  const ad::Var e = ad::affine_scale_shift(age, 1.0, dx == Diagnosis::AD ? cfg.ad_shift_years : 0.0);
  const ad::Var t = ad::affine_scale_shift(e, 1.0 / kAgeSpan, -kMinAge / kAgeSpan);

  const double rv0 = latent.ventricle_base_radius;
  const double th0 = base_thickness(latent);
  const ad::Var rv = ad::affine_scale_shift(t, rv0 * cfg.ventricle_growth, rv0);
  const ad::Var th = ad::affine_scale_shift(t, -th0 * cfg.cortex_thinning, th0);
  const ad::Var r_inner = ad::affine_scale_shift(th, -1.0, latent.cortex_outer_radius);

  const ad::Var neg_radius = tape.constant(neg_r);
  const ad::Var ventricle = ad::sigmoid(ad::affine_scale_shift(ad::add(neg_radius, rv), inv_tau, 0.0));
  const ad::Var inner = ad::sigmoid(ad::affine_scale_shift(ad::add(neg_radius, r_inner), inv_tau, 0.0));

  const ad::Var img = ad::add(ad::add(tape.constant(fixed), ad::affine_scale_shift(inner, kScale * kInnerWeight, 0.0)),
                              ad::affine_scale_shift(ventricle, kScale * kVentricleWeight, 0.0));
  return img;
}

ad::Tensor render(const MorphLatent& latent, double age, Diagnosis dx, const RenderConfig& cfg) {
  ad::Tape tape;
  return render(tape, latent, tape.constant(ad::Tensor::scalar(age)), dx, cfg).value();
}

}  // namespace advcf::world
