#pragma once

#include <cstdint>

#include "advcf/autodiff/tape.hpp"
#include "advcf/types.hpp"

namespace advcf::world {

/// Subject identity; everything the renderer keeps fixed across counterfactuals.
/// Radii are fractions of the image width.
struct MorphLatent {
  double ventricle_base_radius = 0.075;
  double cortex_outer_radius = 0.39;
  double center_offset_x = 0.0;
  double center_offset_y = 0.0;
  std::uint64_t texture_seed = 0;

  friend bool operator==(const MorphLatent&, const MorphLatent&) = default;
};

/// Documented sampling ranges of MorphLatent (uniform).
struct LatentRanges {
  double ventricle_min = 0.06, ventricle_max = 0.09;
  double cortex_min = 0.36, cortex_max = 0.42;
  double offset_max = 0.03;
};

struct RenderConfig {
  std::size_t size = 16;
  double edge_softness = 0.03;
  /// Relative ventricle growth over the 30-year span.
  double ventricle_growth = 0.6;
  /// Relative cortex thinning over the 30-year span.
  double cortex_thinning = 0.3;
  /// Years of extra atrophy carried by AD.
  double ad_shift_years = 10.0;
  double noise_amplitude = 0.02;

  friend bool operator==(const RenderConfig&, const RenderConfig&) = default;
};

/// Ages the renderer accepts (wider than the clipping range).
inline constexpr double kRenderMinAge = 55.0;
inline constexpr double kRenderMaxAge = 100.0;

/// Cortex thickness at effective age 60 as a fraction of (outer - ventricle base).
inline constexpr double kCortexThicknessFraction = 0.45;

void validate(const RenderConfig& cfg);
void validate(const MorphLatent& latent);

/// Effective age e = age + shift * [AD].
double effective_age(double age, Diagnosis dx, const RenderConfig& cfg);

/// Renders an H x W image, differentiable in `age` (a one-element Var, years).
/// A central ventricle disk grows and the cortical rim thins with effective age;
/// all edges are logistic ramps of width edge_softness. Texture noise keyed by
/// the latent's texture_seed is added as a constant. Intensities lie in [-1, 1].
ad::Var render(ad::Tape& tape, const MorphLatent& latent, const ad::Var& age, Diagnosis dx, const RenderConfig& cfg);

ad::Tensor render(const MorphLatent& latent, double age, Diagnosis dx, const RenderConfig& cfg);

/// Texture noise field for a latent, uniform in [-amplitude, amplitude].
ad::Tensor texture_noise(const MorphLatent& latent, const RenderConfig& cfg);

/// Geometry at a given age; used by tests and oracles.
struct Geometry {
  double ventricle_radius;
  double cortex_inner_radius;
  double cortex_outer_radius;
};
Geometry geometry(const MorphLatent& latent, double age, Diagnosis dx, const RenderConfig& cfg);

}  // namespace advcf::world
