#include "cdaae/graph.hpp"

#include <algorithm>

namespace cdaae {

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(std::size_t id) const {
  if (id >= nodes_.size()) throw UsageError("graph node id out of range");
  return nodes_[id];
}

template <typename T>
typename Graph<T>::Node& Graph<T>::node(std::size_t id) {
  if (id >= nodes_.size()) throw UsageError("graph node id out of range");
  return nodes_[id];
}

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node& n = nodes_.emplace_back();
  n.op = "constant";
  n.owned = std::move(value);
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Graph<T>::constant_ref(const Tensor<T>& value) {
  Node& n = nodes_.emplace_back();
  n.op = "constant";
  n.ref = &value;
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Graph<T>::parameter(Tensor<T>& param) {
  if (!param.requires_grad()) return constant_ref(param);
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) return {this, it->second};
  Node& n = nodes_.emplace_back();
  n.op = "parameter";
  n.ref = &param;
  n.sink = &param;
  n.needs_grad = true;
  param_nodes_.emplace(&param, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Graph<T>::record(std::string_view op, std::vector<std::size_t> inputs, Tensor<T> output, BackwardFn fn) {
  bool needs = false;
  for (auto id : inputs) {
    if (id >= nodes_.size()) throw UsageError("op input refers to a node outside this graph");
    needs = needs || nodes_[id].needs_grad;
  }
  Node& n = nodes_.emplace_back();
  n.op = std::string(op);
  n.inputs = std::move(inputs);
  n.owned = std::move(output);
  n.needs_grad = needs;
  if (needs) n.backward = std::move(fn);
  return {this, nodes_.size() - 1};
}

template <typename T>
std::vector<T>& Graph<T>::grad(std::size_t id) {
  Node& n = node(id);
  if (n.grad.empty()) n.grad.assign(n.value().numel(), T{0});
  return n.grad;
}

template <typename T>
std::span<const T> Graph<T>::grad_of(std::size_t id) const {
  return node(id).grad;
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
  if (loss.graph != this) throw UsageError("backward: loss belongs to a different graph");
  if (value(loss.id).numel() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " + shape_to_string(value(loss.id).shape()));
  }
  grad(loss.id)[0] = T{1};
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
  for (std::size_t i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[i];
    if (!n.sink || n.grad.empty()) continue;
    auto& dst = n.sink->ensure_grad();
    std::transform(dst.begin(), dst.end(), n.grad.begin(), dst.begin(), std::plus<T>{});
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace cdaae
