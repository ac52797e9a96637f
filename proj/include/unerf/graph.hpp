#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unerf/tensor.hpp"

namespace unerf {

enum class OpKind : std::uint8_t {
  Leaf,
  MatMul,
  Linear,
  Conv1d,
  Add,
  Sub,
  Mul,
  ScaleShift,
  Relu,
  Softplus,
  Sigmoid,
  Exp,
  Concat,
  Reshape,
  GatherRows,
  LerpRows,
  Sum,
  Mean,
  SumRows,
  RayWeights,
  RaySum,
  Custom,
};

const char* op_name(OpKind kind) noexcept;

// Outputs of activation functions are what the accountant counts as stored
// forward activations.
constexpr bool is_activation(OpKind kind) noexcept {
  return kind == OpKind::Relu || kind == OpKind::Softplus || kind == OpKind::Sigmoid;
}

struct TapeStats {
  std::size_t nodes = 0;
  std::size_t activation_elements = 0;  // elements of activation-function outputs
  std::size_t stored_elements = 0;      // elements of every non-leaf node value
};

// Reverse-mode tape. Nodes are appended in execution order, which is a valid
// topological order. Confined to one thread; parameter tensors registered as
// leaves share their buffers with the caller.
template <typename T>
class Graph {
 public:
  // Receives the gradient flowing into the node's output.
  using Backward = std::function<void(Graph&, std::span<const T>)>;

  explicit Graph(bool accounting = true) : accounting_(accounting) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Registers `value` as a differentiable input; the returned tensor shares
  // its buffer.
  Tensor<T> leaf(const Tensor<T>& value);

  // Attaches `value` as the output of an op over `inputs`.
  Tensor<T> record(Tensor<T> value, OpKind kind, std::initializer_list<const Tensor<T>*> inputs,
                   Backward backward);

  void backward(const Tensor<T>& loss);

  // Gradient accumulated for `t` (zeros if nothing flowed into it).
  Tensor<T> grad(const Tensor<T>& t) const;

  // Accumulation target for `t`'s gradient, allocated zeroed on first use.
  // nullptr when `t` is not attached to this graph.
  T* grad_sink(const Tensor<T>& t);

  void zero_grad();

  std::size_t size() const noexcept { return nodes_.size(); }
  bool accounting() const noexcept { return accounting_; }
  // Running totals; all zero when accounting is disabled.
  const TapeStats& stats() const noexcept { return stats_; }

  // Describes the first node (in tape order) holding a NaN/Inf value.
  std::optional<std::string> first_non_finite() const;

 private:
  struct Node {
    OpKind kind;
    Tensor<T> value;
    Backward backward;
    Buffer<T> grad;
  };

  std::vector<Node> nodes_;
  bool accounting_;
  TapeStats stats_;
};

// Graph shared by the attached tensors among `ts`; nullptr if none attached.
// Throws if attached tensors belong to different graphs.
template <typename T>
Graph<T>* common_graph(std::initializer_list<const Tensor<T>*> ts) {
  Graph<T>* g = nullptr;
  for (const Tensor<T>* t : ts) {
    if (!t->attached()) continue;
    if (g && g != t->graph()) throw ContractError("operands belong to different graphs");
    g = t->graph();
  }
  return g;
}

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace unerf
