#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "advcf/autodiff/tape.hpp"
#include "advcf/random.hpp"

namespace advcf::test {

/// Scalar function of plain tensors, evaluated on a fresh tape.
using TapeFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

inline double eval(const TapeFn& f, const std::vector<ad::Tensor>& xs) {
  ad::Tape tape;
  std::vector<ad::Var> vs;
  for (const auto& x : xs) vs.push_back(tape.param(x));
  return f(tape, vs).value().item();
}

/// Central differences of f at xs, one tensor per input.
inline std::vector<ad::Tensor> numeric_grad(const TapeFn& f, std::vector<ad::Tensor> xs, double h = 1e-5) {
  std::vector<ad::Tensor> out;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    ad::Tensor g(xs[k].shape());
    for (std::size_t i = 0; i < xs[k].numel(); ++i) {
      const double x0 = xs[k][i];
      xs[k][i] = x0 + h;
      const double fp = eval(f, xs);
      xs[k][i] = x0 - h;
      const double fm = eval(f, xs);
      xs[k][i] = x0;
      g[i] = (fp - fm) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline std::vector<ad::Tensor> analytic_grad(const TapeFn& f, const std::vector<ad::Tensor>& xs) {
  ad::Tape tape;
  std::vector<ad::Var> vs;
  for (const auto& x : xs) vs.push_back(tape.param(x));
  const ad::Var root = f(tape, vs);
  const ad::Gradients g = ad::backward(tape, root);
  std::vector<ad::Tensor> out;
  for (const auto& v : vs) out.push_back(g.of(v));
  return out;
}

/// ||a - b|| / max(||a||, ||b||) over all inputs.
inline double rel_error(const std::vector<ad::Tensor>& a, const std::vector<ad::Tensor>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].numel(); ++i) {
      diff += (a[k][i] - b[k][i]) * (a[k][i] - b[k][i]);
      na += a[k][i] * a[k][i];
      nb += b[k][i] * b[k][i];
    }
  }
  const double den = std::sqrt(std::max(na, nb));
  return den == 0.0 ? 0.0 : std::sqrt(diff) / den;
}

inline ad::Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  ad::Tensor t(std::move(shape));
  for (double& v : t.buffer()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace advcf::test
