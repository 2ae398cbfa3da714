#include "advcf/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advcf/random.hpp"

namespace advcf::ad {
namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.constant(t));
  return f(tape, vars).value().item();
}

}  // namespace

GradCheck check_gradient(const ScalarFn& f, const std::vector<Tensor>& inputs, double h, std::size_t max_coords,
                         std::uint64_t seed) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.param(t));
  const Var out = f(tape, vars);
  const Gradients grads = backward(tape, out);

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t k = 0; k < inputs[i].numel(); ++k) coords.emplace_back(i, k);
  }
  if (max_coords > 0 && coords.size() > max_coords) {
    Rng rng(seed);
    rng.shuffle(std::span(coords));
    coords.resize(max_coords);
  }

  std::vector<Tensor> work = inputs;
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (const auto& [i, k] : coords) {
    const double x = work[i][k];
    work[i][k] = x + h;
    const double up = evaluate(f, work);
    work[i][k] = x - h;
    const double down = evaluate(f, work);
    work[i][k] = x;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = grads.of(vars[i])[k];
    diff += (analytic - numeric) * (analytic - numeric);
    na += analytic * analytic;
    nn += numeric * numeric;
  }
  const double denom = std::sqrt(std::max(na, nn));
  return {denom > 0.0 ? std::sqrt(diff) / denom : 0.0, coords.size()};
}

}  // namespace advcf::ad
