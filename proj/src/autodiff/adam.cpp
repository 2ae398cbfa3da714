#include "advcf/autodiff/adam.hpp"

#include <cmath>
#include <string>

namespace advcf::ad {

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params but " + std::to_string(grads.size()) +
                     " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape()) {
      throw ShapeError("adam_step: param " + shape_str(params[i].shape()) + " vs grad " + shape_str(grads[i].shape()));
    }
  }
  if (state.first_moment.empty()) {
    for (const Tensor& p : params) {
      state.first_moment.emplace_back(p.shape());
      state.second_moment.emplace_back(p.shape());
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adam_step: state tracks a different parameter list");

  const AdamConfig& c = state.config;
  const double lr = c.learning_rate / (1.0 + c.decay * static_cast<double>(state.step));
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    if (m.shape() != params[i].shape()) throw ShapeError("adam_step: moment buffer shape drifted");
    const Tensor& g = grads[i];
    Tensor& p = params[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

}  // namespace advcf::ad
