#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cdaae/tensor.hpp"

namespace cdaae {

template <typename T>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
struct Var {
  Graph<T>* graph = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return graph->value(id); }
  const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so insertion
/// order is a topological order and backward walks it in reverse.
///
/// A Graph is single-threaded. Parameters enter either tracked
/// (`parameter`, gradients flow into Tensor::grad) or frozen
/// (`constant_ref`, no gradient is computed for them).
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value);
  /// Borrows `value`; the caller keeps it alive and unmodified.
  Var<T> constant_ref(const Tensor<T>& value);
  /// Tracked leaf. Repeated calls with the same tensor return the same node.
  /// A tensor with requires_grad() == false enters as a constant.
  Var<T> parameter(Tensor<T>& param);

  /// Appends an op node. `fn` receives the graph and the new node id and
  /// accumulates into the grads of the inputs that need them.
  Var<T> record(std::string_view op, std::vector<std::size_t> inputs, Tensor<T> output, BackwardFn fn);

  const Tensor<T>& value(std::size_t id) const { return node(id).value(); }
  bool needs_grad(std::size_t id) const { return node(id).needs_grad; }
  std::string_view op(std::size_t id) const { return node(id).op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return node(id).inputs; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient buffer of a node, zero-initialised on first access.
  std::vector<T>& grad(std::size_t id);
  /// Gradient of a node after backward; empty when the node was not reached.
  std::span<const T> grad_of(std::size_t id) const;

  /// Seeds d(loss)/d(loss) = 1 and propagates to every node that needs a
  /// gradient, then adds leaf gradients into their parameters' grad buffers.
  void backward(Var<T> loss);

  /// When enabled, non-smooth ops log which side of each kink every element
  /// fell on. Gradient checks compare logs to detect kink crossings.
  void set_record_branches(bool on) { record_branches_ = on; }
  bool record_branches() const { return record_branches_; }
  void log_branch(std::uint8_t side) { branch_log_.push_back(side); }
  const std::vector<std::uint8_t>& branch_log() const { return branch_log_; }

 private:
  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor<T> owned;
    const Tensor<T>* ref = nullptr;
    Tensor<T>* sink = nullptr;
    bool needs_grad = false;
    std::vector<T> grad;
    BackwardFn backward;

    const Tensor<T>& value() const { return ref ? *ref : owned; }
  };

  const Node& node(std::size_t id) const;
  Node& node(std::size_t id);

  std::deque<Node> nodes_;
  std::unordered_map<const Tensor<T>*, std::size_t> param_nodes_;
  bool record_branches_ = false;
  std::vector<std::uint8_t> branch_log_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace cdaae
