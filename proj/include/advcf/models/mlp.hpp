#pragma once

#include <span>
#include <vector>

#include "advcf/autodiff/tape.hpp"
#include "advcf/random.hpp"

namespace advcf::models {

/// Fully connected network: widths = {input, hidden..., output}; params are
/// laid out as [W0 (in x h0), b0 (1 x h0), W1, b1, ...].
struct Mlp {
  std::vector<std::size_t> widths;
  std::vector<ad::Tensor> params;

  /// Glorot-uniform weights, zero biases.
  static Mlp glorot(std::vector<std::size_t> widths, Rng& rng);

  std::size_t layers() const { return widths.size() - 1; }
  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  std::size_t parameter_count() const;

  /// Records every parameter on `tape`, tracked or constant.
  std::vector<ad::Var> bind(ad::Tape& tape, bool trainable) const;
};

/// Pre-activation output of the last layer; hidden layers use relu. `x` is
/// a batch (B x input_dim).
ad::Var mlp_forward(const ad::Var& x, std::span<const ad::Var> params);

/// Flattens H x W images into the rows of a (B x H*W) matrix.
ad::Tensor stack_rows(std::span<const ad::Tensor* const> images);

}  // namespace advcf::models
