#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "advcf/autodiff/tensor.hpp"
#include "advcf/random.hpp"

namespace advcf::world {

enum class AugOp { Rotate, Shift, Scale, Flip };

std::string_view aug_op_name(AugOp op);
std::optional<AugOp> parse_aug_op(std::string_view name);

/// Largest magnitude per op: degrees for rotation, fraction of the image
/// width for shift, relative zoom for scale. Flip treats any nonzero
/// magnitude as "flip".
double max_magnitude(AugOp op);

/// Geometric transform of an H x W image with bilinear resampling and zero
/// padding. Magnitude is signed and must satisfy |magnitude| <= max_magnitude(op).
/// `seed` picks the shift direction; other ops ignore it.
ad::Tensor conventional_augment(const ad::Tensor& image, AugOp op, double magnitude, std::uint64_t seed = 0);

/// Draws a random magnitude within range and applies the op.
ad::Tensor random_augment(const ad::Tensor& image, AugOp op, Rng& rng);

}  // namespace advcf::world
