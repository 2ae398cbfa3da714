#include "advcf/models/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace advcf::models {

Mlp Mlp::glorot(std::vector<std::size_t> widths, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("mlp needs at least input and output widths");
  Mlp net;
  net.widths = std::move(widths);
  for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
    const std::size_t in = net.widths[l];
    const std::size_t out = net.widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    ad::Tensor w({in, out});
    for (double& v : w.buffer()) v = rng.uniform(-limit, limit);
    net.params.push_back(std::move(w));
    net.params.emplace_back(ad::Shape{1, out});
  }
  return net;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.numel();
  return n;
}

std::vector<ad::Var> Mlp::bind(ad::Tape& tape, bool trainable) const {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(trainable ? tape.param(p) : tape.constant(p));
  return vars;
}

ad::Var mlp_forward(const ad::Var& x, std::span<const ad::Var> params) {
  if (params.size() % 2 != 0 || params.empty()) throw std::invalid_argument("mlp params come in (W, b) pairs");
  if (x.shape().size() != 2) throw ad::ShapeError("mlp_forward expects a (batch x features) input");
  ad::Tape& tape = x.tape();
  // Bias rows are broadcast over the batch through a ones column.
  const ad::Var ones = tape.constant(ad::Tensor({x.shape()[0], 1}, 1.0));
  ad::Var h = x;
  const std::size_t layers = params.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::add(ad::matmul(h, params[2 * l]), ad::matmul(ones, params[2 * l + 1]));
    if (l + 1 < layers) h = ad::relu(h);
  }
  return h;
}

ad::Tensor stack_rows(std::span<const ad::Tensor* const> images) {
  if (images.empty()) throw ad::ShapeError("stack_rows on empty batch");
  const std::size_t d = images.front()->numel();
  ad::Tensor out({images.size(), d});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->numel() != d) throw ad::ShapeError("stack_rows: images differ in size");
    std::copy(images[i]->data().begin(), images[i]->data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return out;
}

}  // namespace advcf::models
