#include "advcf/synthworld/conventional.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace advcf::world {
namespace {

// Bilinear sample at fractional pixel coordinates; neighbors outside the
// image read as zero.
double bilinear(const ad::Tensor& img, double x, double y) {
  const auto h = static_cast<std::ptrdiff_t>(img.dim(0));
  const auto w = static_cast<std::ptrdiff_t>(img.dim(1));
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto x0 = static_cast<std::ptrdiff_t>(fx);
  const auto y0 = static_cast<std::ptrdiff_t>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  auto px = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) {
    if (xx < 0 || yy < 0 || xx >= w || yy >= h) return 0.0;
    return img.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
  };
  return (1 - ay) * ((1 - ax) * px(y0, x0) + ax * px(y0, x0 + 1)) +
         ay * ((1 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1));
}

template <class Map>
ad::Tensor warp(const ad::Tensor& img, Map inverse) {
  ad::Tensor out(img.shape());
  for (std::size_t i = 0; i < img.dim(0); ++i) {
    for (std::size_t j = 0; j < img.dim(1); ++j) {
      const auto [sx, sy] = inverse(static_cast<double>(j), static_cast<double>(i));
      out.at(i, j) = bilinear(img, sx, sy);
    }
  }
  return out;
}

}  // namespace

std::string_view aug_op_name(AugOp op) {
  switch (op) {
    case AugOp::Rotate: return "rotate";
    case AugOp::Shift: return "shift";
    case AugOp::Scale: return "scale";
    case AugOp::Flip: return "flip";
  }
  return "?";
}

std::optional<AugOp> parse_aug_op(std::string_view name) {
  for (AugOp op : {AugOp::Rotate, AugOp::Shift, AugOp::Scale, AugOp::Flip}) {
    if (aug_op_name(op) == name) return op;
  }
  return std::nullopt;
}

double max_magnitude(AugOp op) {
  switch (op) {
    case AugOp::Rotate: return 10.0;
    case AugOp::Shift: return 0.2;
    case AugOp::Scale: return 0.2;
    case AugOp::Flip: return 1.0;
  }
  return 0.0;
}

ad::Tensor conventional_augment(const ad::Tensor& image, AugOp op, double magnitude, std::uint64_t seed) {
  if (image.rank() != 2) throw ad::ShapeError("conventional_augment expects an H x W image");
  if (std::abs(magnitude) > max_magnitude(op) + 1e-12) {
    throw std::out_of_range(std::string(aug_op_name(op)) + " magnitude " + std::to_string(magnitude) +
                            " out of range");
  }
  if (magnitude == 0.0) return image;

  const double cx = (static_cast<double>(image.dim(1)) - 1.0) / 2.0;
  const double cy = (static_cast<double>(image.dim(0)) - 1.0) / 2.0;
  switch (op) {
    case AugOp::Rotate: {
      const double th = magnitude * std::numbers::pi / 180.0;
      const double c = std::cos(th);
      const double s = std::sin(th);
      return warp(image, [&](double x, double y) {
        const double dx = x - cx;
        const double dy = y - cy;
        return std::pair{c * dx + s * dy + cx, -s * dx + c * dy + cy};
      });
    }
    case AugOp::Shift: {
      Rng rng(mix64(seed));
      const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double dist = magnitude * static_cast<double>(image.dim(1));
      const double ox = dist * std::cos(dir);
      const double oy = dist * std::sin(dir);
      return warp(image, [&](double x, double y) { return std::pair{x - ox, y - oy}; });
    }
    case AugOp::Scale: {
      const double z = 1.0 + magnitude;
      return warp(image, [&](double x, double y) { return std::pair{(x - cx) / z + cx, (y - cy) / z + cy}; });
    }
    case AugOp::Flip: {
      ad::Tensor out(image.shape());
      const std::size_t w = image.dim(1);
      for (std::size_t i = 0; i < image.dim(0); ++i) {
        for (std::size_t j = 0; j < w; ++j) out.at(i, j) = image.at(i, w - 1 - j);
      }
      return out;
    }
  }
  throw std::invalid_argument("unknown augmentation op");
}

ad::Tensor random_augment(const ad::Tensor& image, AugOp op, Rng& rng) {
  const double m = max_magnitude(op);
  double magnitude = 0.0;
  if (op == AugOp::Flip) {
    magnitude = rng.uniform() < 0.5 ? 1.0 : 0.0;
  } else {
    magnitude = rng.uniform(-m, m);
  }
  return conventional_augment(image, op, magnitude, rng.next());
}

}  // namespace advcf::world
