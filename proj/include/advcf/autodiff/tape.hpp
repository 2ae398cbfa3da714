#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string_view>
#include <vector>

#include "advcf/autodiff/tensor.hpp"

namespace advcf::ad {

using NodeId = std::uint32_t;

enum class OpKind : std::uint8_t {
  Leaf,
  Add,
  Mul,
  MatMul,
  Relu,
  Sigmoid,
  Sin,
  Cos,
  Mean,
  Concat,
  AffineScaleShift,
  Reshape,
  Bce,
};

std::string_view op_name(OpKind kind);

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// tape that created it is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  NodeId id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

struct Node {
  OpKind kind = OpKind::Leaf;
  std::vector<NodeId> parents;
  Tensor value;
  bool requires_grad = false;
  // Op attributes: affine scale/shift, concat axis or interleave flag.
  double scale = 1.0;
  double shift = 0.0;
  std::size_t axis = 0;
  bool interleave = false;
  // Bce: labels and clamped probabilities.
  Tensor saved;
};

/// Append-only record of a define-by-run computation. Parents always precede
/// children, so reverse id order is a valid topological order. A tape is not
/// thread-safe and should be confined to one thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is tracked.
  Var param(Tensor value);
  /// Leaf excluded from the gradient path.
  Var constant(Tensor value);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  bool owns(const Var& v) const { return v.tape_ == this && v.id_ < nodes_.size(); }

  /// Records a computed node. Validates finiteness of the result.
  Var record(Node node);

 private:
  std::deque<Node> nodes_;
};

/// Gradients of a scalar root with respect to every tracked node.
class Gradients {
 public:
  Gradients(const Tape* tape, std::vector<Tensor> grads) : tape_(tape), grads_(std::move(grads)) {}

  /// d(root)/d(v). Throws if `v` is not on the tape or is not tracked.
  const Tensor& of(const Var& v) const;
  const Tensor& of(NodeId id) const;

 private:
  const Tape* tape_;
  std::vector<Tensor> grads_;
};

/// Reverse-mode sweep from `root`, which must be a one-element node on `tape`.
Gradients backward(const Tape& tape, const Var& root);

// Forward primitives. Elementwise binary ops accept equal shapes or a
// one-element operand broadcast against the other.
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// 2-D matrix product. A rank-1 left operand is treated as a row vector and
/// the leading unit axis is dropped from the result.
Var matmul(const Var& a, const Var& b);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var sin(const Var& x);
Var cos(const Var& x);
Var mean(const Var& x);
/// Concatenation along `axis`. With `interleave`, equal-shaped parts are
/// woven element by element along the last axis: out[..., j*P + p] = part_p[..., j].
Var concat(std::span<const Var> parts, std::size_t axis = 0, bool interleave = false);
/// x * scale + shift.
Var affine_scale_shift(const Var& x, double scale, double shift);
Var reshape(const Var& x, Shape shape);

inline Var sub(const Var& a, const Var& b) { return add(a, affine_scale_shift(b, -1.0, 0.0)); }

/// Probability clamp used by bce_loss.
inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy of probabilities `pred` against {0,1} `labels`
/// of the same shape. Probabilities are clamped to [eps, 1 - eps]; clamped
/// entries receive zero gradient.
Var bce_loss(const Var& pred, const Tensor& labels);

/// Scalar bce of one prediction, with the same clamping as bce_loss.
double bce_value(double p, double y);

}  // namespace advcf::ad
