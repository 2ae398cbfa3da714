#include "advcf/autodiff/tape.hpp"

#include <string>

namespace advcf::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::MatMul: return "matmul";
    case OpKind::Relu: return "relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Sin: return "sin";
    case OpKind::Cos: return "cos";
    case OpKind::Mean: return "mean";
    case OpKind::Concat: return "concat";
    case OpKind::AffineScaleShift: return "affine_scale_shift";
    case OpKind::Reshape: return "reshape";
    case OpKind::Bce: return "bce_loss";
  }
  return "?";
}

const Tensor& Var::value() const { return tape_->node(id_).value; }

Var Tape::param(Tensor value) {
  Node n;
  n.kind = OpKind::Leaf;
  n.value = std::move(value);
  n.requires_grad = true;
  return record(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.kind = OpKind::Leaf;
  n.value = std::move(value);
  n.requires_grad = false;
  return record(std::move(n));
}

Var Tape::record(Node node) {
  const auto id = static_cast<NodeId>(nodes_.size());
  for (NodeId p : node.parents) {
    if (p >= id) throw std::logic_error("tape parent id must precede child");
    if (nodes_[p].requires_grad) node.requires_grad = true;
  }
  if (!node.value.all_finite()) {
    throw NonFiniteError(std::string("non-finite value produced by ") + std::string(op_name(node.kind)));
  }
  nodes_.push_back(std::move(node));
  return Var(this, id);
}

const Tensor& Gradients::of(const Var& v) const {
  if (!tape_->owns(v)) throw std::invalid_argument("variable is not on this tape");
  return of(v.id());
}

const Tensor& Gradients::of(NodeId id) const {
  if (id >= grads_.size()) throw std::invalid_argument("node id not on tape");
  if (!tape_->node(id).requires_grad) throw std::invalid_argument("gradient not tracked for constant node");
  return grads_[id];
}

}  // namespace advcf::ad
