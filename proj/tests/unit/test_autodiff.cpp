#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "advcf/autodiff/adam.hpp"
#include "advcf/autodiff/gradcheck.hpp"
#include "advcf/autodiff/tape.hpp"
#include "test_util.hpp"

using namespace advcf;
using namespace advcf::ad;
using advcf::test::TapeFn;

namespace {

// Weighted sum so every output coordinate carries a distinct gradient.
Var weighted(Tape& tape, const Var& y, std::uint64_t seed) {
  Rng rng(seed);
  return mean(mul(y, tape.constant(test::random_tensor(y.shape(), rng))));
}

// Values kept away from relu's kink.
Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t = test::random_tensor(std::move(shape), rng, 0.1, 1.5);
  for (double& v : t.buffer()) {
    if (rng.uniform() < 0.5) v = -v;
  }
  return t;
}

struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  TapeFn f;
};

std::vector<OpCase> op_cases() {
  return {
      {"add", {{3, 4}, {3, 4}}, [](Tape& t, const auto& v) { return weighted(t, add(v[0], v[1]), 1); }},
      {"add_scalar", {{3, 4}, {}}, [](Tape& t, const auto& v) { return weighted(t, add(v[0], v[1]), 2); }},
      {"mul", {{3, 4}, {3, 4}}, [](Tape& t, const auto& v) { return weighted(t, mul(v[0], v[1]), 3); }},
      {"mul_scalar", {{}, {2, 5}}, [](Tape& t, const auto& v) { return weighted(t, mul(v[0], v[1]), 4); }},
      {"matmul", {{3, 4}, {4, 2}}, [](Tape& t, const auto& v) { return weighted(t, matmul(v[0], v[1]), 5); }},
      {"matmul_vec", {{4}, {4, 3}}, [](Tape& t, const auto& v) { return weighted(t, matmul(v[0], v[1]), 6); }},
      {"relu", {{5, 3}}, [](Tape& t, const auto& v) { return weighted(t, relu(v[0]), 7); }},
      {"sigmoid", {{5, 3}}, [](Tape& t, const auto& v) { return weighted(t, sigmoid(v[0]), 8); }},
      {"sin", {{5, 3}}, [](Tape& t, const auto& v) { return weighted(t, ad::sin(v[0]), 9); }},
      {"cos", {{5, 3}}, [](Tape& t, const auto& v) { return weighted(t, ad::cos(v[0]), 10); }},
      {"mean", {{6}}, [](Tape&, const auto& v) { return mean(mul(v[0], v[0])); }},
      {"concat0", {{2, 3}, {1, 3}},
       [](Tape& t, const auto& v) {
         const Var p[] = {v[0], v[1]};
         return weighted(t, concat(p, 0), 11);
       }},
      {"concat1", {{2, 3}, {2, 2}},
       [](Tape& t, const auto& v) {
         const Var p[] = {v[0], v[1]};
         return weighted(t, concat(p, 1), 12);
       }},
      {"concat_interleave", {{2, 3}, {2, 3}},
       [](Tape& t, const auto& v) {
         const Var p[] = {v[0], v[1]};
         return weighted(t, concat(p, 1, true), 13);
       }},
      {"affine", {{4, 2}}, [](Tape& t, const auto& v) { return weighted(t, affine_scale_shift(v[0], -1.7, 0.3), 14); }},
      {"reshape", {{2, 6}}, [](Tape& t, const auto& v) { return weighted(t, reshape(v[0], {3, 4}), 15); }},
      {"sub", {{3, 2}, {3, 2}}, [](Tape& t, const auto& v) { return weighted(t, sub(v[0], v[1]), 16); }},
  };
}

}  // namespace

TEST(Autodiff, MatmulIdentity) {
  Tape tape;
  const Var i2 = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  const Var x = tape.constant(Tensor::matrix({{3}, {4}}));
  EXPECT_EQ(matmul(i2, x).value(), Tensor::matrix({{3}, {4}}));
}

TEST(Autodiff, SigmoidAtZero) {
  Tape tape;
  EXPECT_EQ(sigmoid(tape.constant(Tensor::scalar(0.0))).value().item(), 0.5);
}

TEST(Autodiff, SinHalfPi) {
  Tape tape;
  EXPECT_DOUBLE_EQ(ad::sin(tape.constant(Tensor::scalar(std::numbers::pi / 2))).value().item(), 1.0);
}

TEST(Autodiff, MeanGradient) {
  Tape tape;
  const Var x = tape.param(Tensor::vector({1, -2, 3, 7}));
  const Gradients g = backward(tape, mean(x));
  EXPECT_EQ(g.of(x), Tensor::vector({0.25, 0.25, 0.25, 0.25}));
}

TEST(Autodiff, SigmoidSlopeAtZero) {
  Tape tape;
  const Var w = tape.param(Tensor::scalar(0.0));
  const Var x = tape.constant(Tensor::scalar(1.0));
  const Gradients g = backward(tape, sigmoid(mul(w, x)));
  EXPECT_DOUBLE_EQ(g.of(w).item(), 0.25);
}

TEST(Autodiff, EveryPrimitiveMatchesFiniteDifferences) {
  for (const OpCase& c : op_cases()) {
    Rng rng(derive_seed(99, c.name));
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Tensor> xs;
      for (const Shape& s : c.shapes) xs.push_back(away_from_zero(s, rng));
      worst = std::max(worst, test::rel_error(test::analytic_grad(c.f, xs), test::numeric_grad(c.f, xs)));
    }
    EXPECT_LT(worst, 1e-6) << c.name;
  }
}

TEST(Autodiff, BceMatchesFiniteDifferences) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor labels({6, 1});
    for (double& y : labels.buffer()) y = rng.uniform() < 0.5 ? 0.0 : 1.0;
    const TapeFn f = [&](Tape&, const std::vector<Var>& v) { return bce_loss(v[0], labels); };
    const std::vector<Tensor> xs{test::random_tensor({6, 1}, rng, 0.05, 0.95)};
    EXPECT_LT(test::rel_error(test::analytic_grad(f, xs), test::numeric_grad(f, xs)), 1e-6);
  }
}

TEST(Autodiff, BceKnownValues) {
  Tape tape;
  const double ln2 = bce_loss(tape.constant(Tensor::scalar(0.5)), Tensor::scalar(1.0)).value().item();
  EXPECT_NEAR(ln2, 0.693147, 1e-6);
  const double confident = bce_loss(tape.constant(Tensor::scalar(1.0 - kBceEpsilon)), Tensor::scalar(1.0)).value().item();
  EXPECT_NEAR(confident, 0.0, 1e-6);
  EXPECT_NEAR(bce_value(0.5, 1.0), std::log(2.0), 1e-15);
}

TEST(Autodiff, BceMatchesScalarLoop) {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + rng.index(40);
    Tensor p = test::random_tensor({n, 1}, rng, 0.0, 1.0);
    p[0] = 0.0;  // exercises the clamp
    Tensor y({n, 1});
    for (double& v : y.buffer()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    double oracle = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double q = std::min(std::max(p[i], 1e-7), 1.0 - 1e-7);
      oracle += y[i] == 1.0 ? -std::log(q) : -std::log(1.0 - q);
    }
    oracle /= static_cast<double>(n);
    Tape tape;
    EXPECT_NEAR(bce_loss(tape.constant(p), y).value().item(), oracle, 1e-12);
  }
}

TEST(Autodiff, BceRejectsBadLabels) {
  Tape tape;
  EXPECT_THROW(bce_loss(tape.constant(Tensor::scalar(0.3)), Tensor::scalar(0.5)), std::invalid_argument);
  EXPECT_THROW(bce_loss(tape.constant(Tensor::vector({0.3, 0.4})), Tensor::scalar(1.0)), ShapeError);
}

TEST(Autodiff, Linearity) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x0 = test::random_tensor({4, 3}, rng);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    Tape tape;
    const Var x = tape.param(x0);
    const Var f = mean(ad::sin(x));
    const Var g = mean(mul(sigmoid(x), x));
    const Var combo = add(affine_scale_shift(f, a, 0.0), affine_scale_shift(g, b, 0.0));
    const Tensor gc = backward(tape, combo).of(x);
    const Tensor gf = backward(tape, f).of(x);
    const Tensor gg = backward(tape, g).of(x);
    for (std::size_t i = 0; i < gc.numel(); ++i) EXPECT_NEAR(gc[i], a * gf[i] + b * gg[i], 1e-14);
  }
}

TEST(Autodiff, Deterministic) {
  auto run = [] {
    Rng rng(8);
    Tape tape;
    const Var w = tape.param(test::random_tensor({5, 3}, rng));
    const Var x = tape.constant(test::random_tensor({2, 5}, rng));
    const Var root = mean(sigmoid(matmul(x, w)));
    return std::pair{root.value(), backward(tape, root).of(w)};
  };
  EXPECT_EQ(run(), run());
}

TEST(Autodiff, ShapeErrors) {
  Tape tape;
  const Var a = tape.constant(Tensor({2, 3}));
  const Var b = tape.constant(Tensor({3, 2}));
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(matmul(a, a), ShapeError);
  EXPECT_THROW(reshape(a, {4}), ShapeError);
  EXPECT_THROW(backward(tape, a), ShapeError);
}

TEST(Autodiff, NonFiniteIsReported) {
  Tape tape;
  const Var big = tape.constant(Tensor::scalar(1e200));
  EXPECT_THROW(mul(big, big), NonFiniteError);
}

TEST(Autodiff, ConstantsHaveNoGradient) {
  Tape tape;
  const Var c = tape.constant(Tensor::scalar(2.0));
  const Var p = tape.param(Tensor::scalar(3.0));
  const Gradients g = backward(tape, mul(c, p));
  EXPECT_EQ(g.of(p).item(), 2.0);
  EXPECT_THROW(g.of(c), std::invalid_argument);
}

TEST(Autodiff, GradcheckAgreesWithLocalOracle) {
  const ScalarFn f = [](Tape&, std::span<const Var> in) { return mean(ad::cos(matmul(in[0], in[1]))); };
  Rng rng(4);
  const std::vector<Tensor> xs{test::random_tensor({2, 3}, rng), test::random_tensor({3, 2}, rng)};
  const GradCheck r = check_gradient(f, xs);
  EXPECT_EQ(r.checked, 12u);
  EXPECT_LT(r.rel_error, 1e-8);
}

TEST(Adam, FirstStepIsLearningRate) {
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.decay = 0.0;
  AdamState st(cfg);
  std::vector<Tensor> params{Tensor::vector({1.0, -1.0, 0.0})};
  const std::vector<Tensor> grads{Tensor::vector({3.0, -0.2, 1e-3})};
  adam_step(params, grads, st);
  EXPECT_NEAR(params[0][0], 1.0 - 0.01, 1e-6);
  EXPECT_NEAR(params[0][1], -1.0 + 0.01, 1e-6);
  EXPECT_NEAR(params[0][2], -0.01, 1e-5);
}

TEST(Adam, ZeroGradientLeavesParams) {
  AdamState st;
  std::vector<Tensor> params{Tensor::vector({0.5, 2.0})};
  adam_step(params, std::vector<Tensor>{Tensor::vector({1.0, 1.0})}, st);
  const Tensor after_first = params[0];
  const Tensor m_before = st.first_moment[0];
  // A zero gradient still moves params through the remaining momentum, so use
  // a fresh state for the pure zero-gradient case.
  AdamState fresh;
  std::vector<Tensor> p2{Tensor::vector({0.5, 2.0})};
  adam_step(p2, std::vector<Tensor>{Tensor::vector({0.0, 0.0})}, fresh);
  EXPECT_EQ(p2[0], Tensor::vector({0.5, 2.0}));
  adam_step(params, std::vector<Tensor>{Tensor::vector({0.0, 0.0})}, st);
  EXPECT_EQ(st.first_moment[0][0], 0.9 * m_before[0]);
  EXPECT_NE(params[0], after_first);
}

TEST(Adam, ThreeStepHandTrace) {
  // x0 = 1, grads 0.5, -0.2, 0.1, lr 0.1, decay 0.01; values from a separate
  // hand computation of the bias-corrected update.
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.decay = 0.01;
  AdamState st(cfg);
  std::vector<Tensor> x{Tensor::scalar(1.0)};
  const double expected[] = {0.900000019999996, 0.8657816282043893, 0.828586366950648};
  const double grads[] = {0.5, -0.2, 0.1};
  for (int t = 0; t < 3; ++t) {
    adam_step(x, std::vector<Tensor>{Tensor::scalar(grads[t])}, st);
    EXPECT_NEAR(x[0].item(), expected[t], 1e-12) << "step " << t;
  }
}

TEST(Adam, ShapeMismatchThrows) {
  AdamState st;
  std::vector<Tensor> params{Tensor({2, 2})};
  EXPECT_THROW(adam_step(params, std::vector<Tensor>{Tensor({4})}, st), ShapeError);
}
