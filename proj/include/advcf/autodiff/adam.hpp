#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "advcf/autodiff/tensor.hpp"

namespace advcf::ad {

struct AdamConfig {
  double learning_rate = 1e-5;
  /// Inverse-time decay: the step size at update t is lr / (1 + decay * t).
  double decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

/// Moment buffers for one parameter list. Buffers are allocated (zeroed) on
/// the first step and must then keep matching the parameter shapes.
struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : config(cfg) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace advcf::ad
