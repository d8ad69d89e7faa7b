#include "mixnet/tensor/graph.hpp"

namespace mixnet {

template <typename T>
Parameter<T>& ParameterSet<T>::add(std::string name, Tensor<T> value) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter<T>>();
  p->name = std::move(name);
  p->grad = Tensor<T>(value.shape());
  p->value = std::move(value);
  params_.push_back(std::move(p));
  return *params_.back();
}

template <typename T>
Parameter<T>* ParameterSet<T>::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

template <typename T>
const Parameter<T>* ParameterSet<T>::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

template <typename T>
std::vector<Parameter<T>*> ParameterSet<T>::all() {
  std::vector<Parameter<T>*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> ParameterSet<T>::all() const {
  std::vector<const Parameter<T>*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename T>
std::size_t ParameterSet<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

template <typename T>
Var<T> Graph<T>::push(Node node) {
  if (consumed_) throw GraphError("graph already consumed by backward; record a new forward pass");
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::leaf(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::parameter(Parameter<T>& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = grad_enabled_;
  n.param = grad_enabled_ ? &p : nullptr;
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const auto& in : inputs) {
      if (&in.graph() != this) throw GraphError("variable belongs to a different graph");
      if (requires_grad(in.id())) n.requires_grad = true;
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <typename T>
Tensor<T>& Graph<T>::grad(int id) {
  auto& n = nodes_.at(static_cast<std::size_t>(id));
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
  if (consumed_) throw GraphError("backward already ran on this graph; re-run the forward pass first");
  if (&loss.graph() != this) throw GraphError("loss belongs to a different graph");
  if (loss.value().numel() != 1) {
    throw GraphError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  consumed_ = true;
  if (!requires_grad(loss.id())) return;
  grad(loss.id())[0] = T(1);
  for (int id = loss.id(); id >= 0; --id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      n.backward(*this, id);
      n.backward = nullptr;
    }
    if (n.param) {
      auto& pg = n.param->grad;
      if (pg.shape() != n.value.shape()) pg = Tensor<T>(n.value.shape());
      for (std::size_t i = 0; i < pg.numel(); ++i) pg[i] += n.grad[i];
    }
  }
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace mixnet
