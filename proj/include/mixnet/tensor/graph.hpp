#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixnet/tensor/tensor.hpp"

namespace mixnet {

/// Misuse of the recording tape (backward twice, non-scalar loss, foreign variables).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A named trainable array owned outside any graph. Gradients accumulate into `grad`.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  void zero_grad() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    grad.fill(T(0));
  }
};

/// Owns parameters in registration order; addresses stay stable for the set's lifetime.
template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, Tensor<T> value);
  Parameter<T>* find(const std::string& name);
  const Parameter<T>* find(const std::string& name) const;
  std::vector<Parameter<T>*> all();
  std::vector<const Parameter<T>*> all() const;
  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

template <typename T>
class Graph;

/// Handle to a node recorded on a Graph.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, int id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr && id_ >= 0; }
  int id() const { return id_; }
  Graph<T>& graph() const;
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  int dim(int axis) const { return value().dim(axis); }
  bool requires_grad() const;

 private:
  Graph<T>* graph_ = nullptr;
  int id_ = -1;
};

/// Eager tape. Nodes are appended in creation order, which is a topological order,
/// so backward simply walks the tape in reverse. One graph per forward/backward step.
template <typename T>
class Graph {
 public:
  /// Receives the graph and the id of the node whose output gradient is ready.
  using BackwardFn = std::function<void(Graph&, int)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Disables gradient recording; parameters then behave like constants.
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Tensor<T> value);
  /// A leaf whose gradient can be read back with grad() after backward.
  Var<T> leaf(Tensor<T> value);
  /// A leaf bound to `p`; backward adds its gradient into p.grad.
  Var<T> parameter(Parameter<T>& p);

  /// Records an op result. `fn` runs during backward if any input requires a gradient.
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn fn);

  /// Reverse sweep from a scalar loss. Each tape supports exactly one sweep.
  void backward(Var<T> loss);

  const Tensor<T>& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  bool requires_grad(int id) const { return nodes_.at(static_cast<std::size_t>(id)).requires_grad; }
  /// Gradient buffer of node `id`, allocated (zero) on first access.
  Tensor<T>& grad(int id);
  bool has_grad(int id) const { return !nodes_.at(static_cast<std::size_t>(id)).grad.empty(); }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  Var<T> push(Node node);

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
  bool consumed_ = false;
};

template <typename T>
Graph<T>& Var<T>::graph() const {
  if (!graph_) throw GraphError("use of an unbound variable");
  return *graph_;
}

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph().value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return graph().requires_grad(id_);
}

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace mixnet
