#include "unerf/graph.hpp"

#include <cmath>

namespace unerf {

const char* op_name(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::Linear: return "linear";
    case OpKind::Conv1d: return "conv1d";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::ScaleShift: return "scale_shift";
    case OpKind::Relu: return "relu";
    case OpKind::Softplus: return "softplus";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Exp: return "exp";
    case OpKind::Concat: return "concat";
    case OpKind::Reshape: return "reshape";
    case OpKind::GatherRows: return "gather_rows";
    case OpKind::LerpRows: return "lerp_rows";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::SumRows: return "sum_rows";
    case OpKind::RayWeights: return "ray_weights";
    case OpKind::RaySum: return "ray_sum";
    case OpKind::Custom: return "custom";
  }
  return "?";
}

template <typename T>
Tensor<T> Graph<T>::leaf(const Tensor<T>& value) {
  if (value.attached()) throw ContractError("leaf(): tensor is already attached to a graph");
  Tensor<T> out = value.detach();
  nodes_.push_back(Node{OpKind::Leaf, out, {}, {}});
  out.graph_ = this;
  out.node_ = nodes_.size() - 1;
  if (accounting_) ++stats_.nodes;
  return out;
}

template <typename T>
Tensor<T> Graph<T>::record(Tensor<T> value, OpKind kind,
                           std::initializer_list<const Tensor<T>*> inputs, Backward backward) {
  for (const Tensor<T>* in : inputs) {
    if (in->attached() && in->graph() != this) {
      throw ContractError(std::string(op_name(kind)) + ": operand belongs to another graph");
    }
  }
  if (accounting_) {
    ++stats_.nodes;
    stats_.stored_elements += value.numel();
    if (is_activation(kind)) stats_.activation_elements += value.numel();
  }
  nodes_.push_back(Node{kind, value.detach(), std::move(backward), {}});
  value.graph_ = this;
  value.node_ = nodes_.size() - 1;
  return value;
}

template <typename T>
T* Graph<T>::grad_sink(const Tensor<T>& t) {
  if (t.graph_ != this) return nullptr;
  Node& n = nodes_[t.node_];
  if (n.grad.empty()) n.grad.assign(n.value.numel(), T{0});
  return n.grad.data();
}

template <typename T>
void Graph<T>::backward(const Tensor<T>& loss) {
  if (loss.graph_ != this) throw ContractError("backward(): loss is not attached to this graph");
  if (loss.numel() != 1) {
    throw ContractError("backward(): loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  T* seed = grad_sink(loss);
  seed[0] += T{1};
  for (std::size_t id = loss.node_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, std::span<const T>(n.grad.data(), n.grad.size()));
  }
}

template <typename T>
Tensor<T> Graph<T>::grad(const Tensor<T>& t) const {
  if (t.graph_ != this) throw ContractError("grad(): tensor is not attached to this graph");
  const Node& n = nodes_[t.node_];
  Tensor<T> g(t.shape());
  if (!n.grad.empty()) std::copy(n.grad.begin(), n.grad.end(), g.data());
  return g;
}

template <typename T>
void Graph<T>::zero_grad() {
  for (Node& n : nodes_) n.grad.clear();
}

template <typename T>
std::optional<std::string> Graph<T>::first_non_finite() const {
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    for (T v : n.value.values()) {
      if (!std::isfinite(v)) {
        return std::string("node ") + std::to_string(id) + " (" + op_name(n.kind) + ", shape " +
               shape_str(n.value.shape()) + ")";
      }
    }
  }
  return std::nullopt;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace unerf
