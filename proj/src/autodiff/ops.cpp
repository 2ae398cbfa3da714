#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "advcf/autodiff/tape.hpp"

namespace advcf::ad {
namespace {

Tape& common_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw std::invalid_argument("operands recorded on different tapes");
  }
  return a.tape();
}

enum class Bcast { Same, BScalar, AScalar };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() == b.shape()) return Bcast::Same;
  if (b.numel() == 1) return Bcast::BScalar;
  if (a.numel() == 1) return Bcast::AScalar;
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                   " do not conform");
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <class F>
Var unary(const Var& x, OpKind kind, F f) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = f(in[i]);
  Node n;
  n.kind = kind;
  n.parents = {x.id()};
  n.value = std::move(out);
  return x.tape().record(std::move(n));
}

// Matrix view of a matmul operand: rank-1 left operands become a single row.
struct MatDims {
  std::size_t rows, cols;
};

MatDims left_dims(const Tensor& t) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw ShapeError("matmul: left operand must be rank 1 or 2, got " + shape_str(t.shape()));
}

MatDims right_dims(const Tensor& t) {
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw ShapeError("matmul: right operand must be rank 2, got " + shape_str(t.shape()));
}

void accumulate(std::vector<Tensor>& grads, NodeId id, Tensor contribution) {
  Tensor& g = grads[id];
  if (g.numel() == 0) {
    g = std::move(contribution);
    return;
  }
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] += contribution[i];
}

// Gradient reaching a broadcast operand: full tensor or the summed scalar.
Tensor reduce_to(const Tensor& parent, const Tensor& g) {
  if (parent.numel() == g.numel()) return g.reshaped(parent.shape());
  const double s = std::accumulate(g.buffer().begin(), g.buffer().end(), 0.0);
  return Tensor(parent.shape(), s);
}

}  // namespace

Var add(const Var& a, const Var& b) {
  Tape& tape = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Bcast k = broadcast_kind(x, y, "add");
  Tensor out(k == Bcast::AScalar ? y.shape() : x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double xv = k == Bcast::AScalar ? x[0] : x[i];
    const double yv = k == Bcast::BScalar ? y[0] : y[i];
    out[i] = xv + yv;
  }
  Node n;
  n.kind = OpKind::Add;
  n.parents = {a.id(), b.id()};
  n.value = std::move(out);
  return tape.record(std::move(n));
}

Var mul(const Var& a, const Var& b) {
  Tape& tape = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Bcast k = broadcast_kind(x, y, "mul");
  Tensor out(k == Bcast::AScalar ? y.shape() : x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double xv = k == Bcast::AScalar ? x[0] : x[i];
    const double yv = k == Bcast::BScalar ? y[0] : y[i];
    out[i] = xv * yv;
  }
  Node n;
  n.kind = OpKind::Mul;
  n.parents = {a.id(), b.id()};
  n.value = std::move(out);
  return tape.record(std::move(n));
}

Var matmul(const Var& a, const Var& b) {
  Tape& tape = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const MatDims l = left_dims(x);
  const MatDims r = right_dims(y);
  if (l.cols != r.rows) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(x.shape()) + " x " + shape_str(y.shape()));
  }
  Shape out_shape = x.rank() == 1 ? Shape{r.cols} : Shape{l.rows, r.cols};
  Tensor out(std::move(out_shape));
  const double* xp = x.data().data();
  const double* yp = y.data().data();
  double* op = out.data().data();
  for (std::size_t i = 0; i < l.rows; ++i) {
    double* orow = op + i * r.cols;
    for (std::size_t k = 0; k < l.cols; ++k) {
      const double xv = xp[i * l.cols + k];
      if (xv == 0.0) continue;
      const double* yrow = yp + k * r.cols;
      for (std::size_t j = 0; j < r.cols; ++j) orow[j] += xv * yrow[j];
    }
  }
  Node n;
  n.kind = OpKind::MatMul;
  n.parents = {a.id(), b.id()};
  n.value = std::move(out);
  return tape.record(std::move(n));
}

Var relu(const Var& x) {
  return unary(x, OpKind::Relu, [](double v) { return v > 0.0 ? v : 0.0; });
}

Var sigmoid(const Var& x) { return unary(x, OpKind::Sigmoid, stable_sigmoid); }

Var sin(const Var& x) {
  return unary(x, OpKind::Sin, [](double v) { return std::sin(v); });
}

Var cos(const Var& x) {
  return unary(x, OpKind::Cos, [](double v) { return std::cos(v); });
}

Var mean(const Var& x) {
  const Tensor& in = x.value();
  if (in.numel() == 0) throw ShapeError("mean of empty tensor");
  const double s = std::accumulate(in.buffer().begin(), in.buffer().end(), 0.0);
  Node n;
  n.kind = OpKind::Mean;
  n.parents = {x.id()};
  n.value = Tensor::scalar(s / static_cast<double>(in.numel()));
  return x.tape().record(std::move(n));
}

Var concat(std::span<const Var> parts, std::size_t axis, bool interleave) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Tape& tape = parts.front().tape();
  const Shape& first = parts.front().shape();
  const std::size_t rank = first.size();
  if (rank == 0) throw ShapeError("concat: operands must have rank >= 1");
  if (interleave) axis = rank - 1;
  if (axis >= rank) throw ShapeError("concat: axis out of range");

  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    common_tape(parts.front(), p);
    const Shape& s = p.shape();
    if (s.size() != rank) throw ShapeError("concat: rank mismatch");
    for (std::size_t d = 0; d < rank; ++d) {
      if (d != axis && s[d] != first[d]) throw ShapeError("concat: extents differ off the concat axis");
    }
    if (interleave && s != first) throw ShapeError("concat: interleave needs equal shapes");
    out_shape[axis] += s[axis];
  }

  Tensor out(out_shape);
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  std::size_t inner = 1;
  for (std::size_t d = axis + 1; d < rank; ++d) inner *= first[d];

  if (interleave) {
    const std::size_t np = parts.size();
    const std::size_t len = first[axis];
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t p = 0; p < np; ++p) {
        const Tensor& src = parts[p].value();
        for (std::size_t j = 0; j < len; ++j) out[o * len * np + j * np + p] = src[o * len + j];
      }
    }
  } else {
    const std::size_t out_row = out_shape[axis] * inner;
    std::size_t offset = 0;
    for (const Var& p : parts) {
      const Tensor& src = p.value();
      const std::size_t row = p.shape()[axis] * inner;
      for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(src.data().begin() + static_cast<std::ptrdiff_t>(o * row), row,
                    out.data().begin() + static_cast<std::ptrdiff_t>(o * out_row + offset));
      }
      offset += row;
    }
  }

  Node n;
  n.kind = OpKind::Concat;
  for (const Var& p : parts) n.parents.push_back(p.id());
  n.value = std::move(out);
  n.axis = axis;
  n.interleave = interleave;
  return tape.record(std::move(n));
}

Var affine_scale_shift(const Var& x, double scale, double shift) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = in[i] * scale + shift;
  Node n;
  n.kind = OpKind::AffineScaleShift;
  n.parents = {x.id()};
  n.value = std::move(out);
  n.scale = scale;
  n.shift = shift;
  return x.tape().record(std::move(n));
}

Var reshape(const Var& x, Shape shape) {
  Node n;
  n.kind = OpKind::Reshape;
  n.parents = {x.id()};
  n.value = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(n));
}

double bce_value(double p, double y) {
  const double pc = std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
  return -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
}

Var bce_loss(const Var& pred, const Tensor& labels) {
  const Tensor& p = pred.value();
  if (p.shape() != labels.shape()) {
    throw ShapeError("bce_loss: prediction " + shape_str(p.shape()) + " vs labels " + shape_str(labels.shape()));
  }
  if (p.numel() == 0) throw ShapeError("bce_loss on empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) throw std::invalid_argument("bce_loss: label outside {0,1}");
    total += bce_value(p[i], labels[i]);
  }
  Node n;
  n.kind = OpKind::Bce;
  n.parents = {pred.id()};
  n.value = Tensor::scalar(total / static_cast<double>(p.numel()));
  n.saved = labels;
  return pred.tape().record(std::move(n));
}

Gradients backward(const Tape& tape, const Var& root) {
  if (!tape.owns(root)) throw std::invalid_argument("backward: root is not on this tape");
  if (root.value().numel() != 1) throw ShapeError("backward: root must be scalar, got " + shape_str(root.shape()));

  std::vector<Tensor> grads(tape.size());
  grads[root.id()] = Tensor(root.shape(), 1.0);

  for (NodeId id = root.id() + 1; id-- > 0;) {
    const Node& n = tape.node(id);
    if (!n.requires_grad || grads[id].numel() == 0) continue;
    const Tensor& g = grads[id];

    switch (n.kind) {
      case OpKind::Leaf:
        break;
      case OpKind::Add: {
        for (NodeId p : n.parents) {
          const Node& pn = tape.node(p);
          if (pn.requires_grad) accumulate(grads, p, reduce_to(pn.value, g));
        }
        break;
      }
      case OpKind::Mul: {
        const Tensor& x = tape.node(n.parents[0]).value;
        const Tensor& y = tape.node(n.parents[1]).value;
        for (int side = 0; side < 2; ++side) {
          const Node& pn = tape.node(n.parents[side]);
          if (!pn.requires_grad) continue;
          const Tensor& other = side == 0 ? y : x;
          Tensor prod(g.shape());
          for (std::size_t i = 0; i < g.numel(); ++i) prod[i] = g[i] * (other.numel() == 1 ? other[0] : other[i]);
          accumulate(grads, n.parents[side], reduce_to(pn.value, prod));
        }
        break;
      }
      case OpKind::MatMul: {
        const Node& an = tape.node(n.parents[0]);
        const Node& bn = tape.node(n.parents[1]);
        const Tensor& a = an.value;
        const Tensor& b = bn.value;
        const MatDims l = left_dims(a);
        const MatDims r = right_dims(b);
        const double* gp = g.data().data();
        if (an.requires_grad) {
          Tensor ga(a.shape());
          const double* bp = b.data().data();
          for (std::size_t i = 0; i < l.rows; ++i) {
            for (std::size_t k = 0; k < l.cols; ++k) {
              const double* brow = bp + k * r.cols;
              const double* grow = gp + i * r.cols;
              double s = 0.0;
              for (std::size_t j = 0; j < r.cols; ++j) s += grow[j] * brow[j];
              ga[i * l.cols + k] = s;
            }
          }
          accumulate(grads, n.parents[0], std::move(ga));
        }
        if (bn.requires_grad) {
          Tensor gb(b.shape());
          const double* ap = a.data().data();
          double* gbp = gb.data().data();
          for (std::size_t i = 0; i < l.rows; ++i) {
            const double* grow = gp + i * r.cols;
            for (std::size_t k = 0; k < l.cols; ++k) {
              const double av = ap[i * l.cols + k];
              if (av == 0.0) continue;
              double* gbrow = gbp + k * r.cols;
              for (std::size_t j = 0; j < r.cols; ++j) gbrow[j] += av * grow[j];
            }
          }
          accumulate(grads, n.parents[1], std::move(gb));
        }
        break;
      }
      case OpKind::Relu: {
        const Tensor& x = tape.node(n.parents[0]).value;
        Tensor gx(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) gx[i] = x[i] > 0.0 ? g[i] : 0.0;
        accumulate(grads, n.parents[0], std::move(gx));
        break;
      }
      case OpKind::Sigmoid: {
        Tensor gx(n.value.shape());
        for (std::size_t i = 0; i < gx.numel(); ++i) {
          const double s = n.value[i];
          gx[i] = g[i] * s * (1.0 - s);
        }
        accumulate(grads, n.parents[0], std::move(gx));
        break;
      }
      case OpKind::Sin:
      case OpKind::Cos: {
        const Tensor& x = tape.node(n.parents[0]).value;
        Tensor gx(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) {
          gx[i] = n.kind == OpKind::Sin ? g[i] * std::cos(x[i]) : -g[i] * std::sin(x[i]);
        }
        accumulate(grads, n.parents[0], std::move(gx));
        break;
      }
      case OpKind::Mean: {
        const Tensor& x = tape.node(n.parents[0]).value;
        accumulate(grads, n.parents[0], Tensor(x.shape(), g[0] / static_cast<double>(x.numel())));
        break;
      }
      case OpKind::Concat: {
        const Shape& os = n.value.shape();
        const std::size_t axis = n.axis;
        std::size_t outer = 1;
        for (std::size_t d = 0; d < axis; ++d) outer *= os[d];
        std::size_t inner = 1;
        for (std::size_t d = axis + 1; d < os.size(); ++d) inner *= os[d];
        const std::size_t np = n.parents.size();
        std::size_t offset = 0;
        for (std::size_t p = 0; p < np; ++p) {
          const Node& pn = tape.node(n.parents[p]);
          const std::size_t row = pn.value.shape()[axis] * inner;
          if (pn.requires_grad) {
            Tensor gp(pn.value.shape());
            if (n.interleave) {
              const std::size_t len = pn.value.shape()[axis];
              for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t j = 0; j < len; ++j) gp[o * len + j] = g[o * len * np + j * np + p];
              }
            } else {
              const std::size_t out_row = os[axis] * inner;
              for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t j = 0; j < row; ++j) gp[o * row + j] = g[o * out_row + offset + j];
              }
            }
            accumulate(grads, n.parents[p], std::move(gp));
          }
          offset += row;
        }
        break;
      }
      case OpKind::AffineScaleShift: {
        Tensor gx(g.shape());
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] = g[i] * n.scale;
        accumulate(grads, n.parents[0], std::move(gx));
        break;
      }
      case OpKind::Reshape: {
        accumulate(grads, n.parents[0], g.reshaped(tape.node(n.parents[0]).value.shape()));
        break;
      }
      case OpKind::Bce: {
        const Tensor& p = tape.node(n.parents[0]).value;
        const Tensor& y = n.saved;
        const double scale = g[0] / static_cast<double>(p.numel());
        Tensor gp(p.shape());
        for (std::size_t i = 0; i < p.numel(); ++i) {
          const double pv = p[i];
          if (pv < kBceEpsilon || pv > 1.0 - kBceEpsilon) {
            gp[i] = 0.0;
          } else {
            gp[i] = scale * (-y[i] / pv + (1.0 - y[i]) / (1.0 - pv));
          }
        }
        accumulate(grads, n.parents[0], std::move(gp));
        break;
      }
    }
  }

  // Tracked nodes the root does not depend on get an explicit zero gradient.
  for (NodeId id = 0; id < tape.size(); ++id) {
    const Node& n = tape.node(id);
    if (n.requires_grad && grads[id].numel() == 0 && n.value.numel() > 0) grads[id] = Tensor(n.value.shape());
  }
  return Gradients(&tape, std::move(grads));
}

}  // namespace advcf::ad
