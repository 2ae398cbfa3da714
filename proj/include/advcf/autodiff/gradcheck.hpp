#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "advcf/autodiff/tape.hpp"

namespace advcf::ad {

/// Builds a one-element result from tracked inputs recorded on `tape`.
using ScalarFn = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

struct GradCheck {
  /// ||analytic - numeric|| / max(||analytic||, ||numeric||) over the checked
  /// coordinates; 0 when both are zero.
  double rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares reverse-mode gradients of `f` at `inputs` with central finite
/// differences of step `h`. With `max_coords` > 0 only that many coordinates,
/// drawn at random from all inputs, are perturbed.
GradCheck check_gradient(const ScalarFn& f, const std::vector<Tensor>& inputs, double h = 1e-5,
                         std::size_t max_coords = 0, std::uint64_t seed = 0);

}  // namespace advcf::ad
