#include "avvp/autodiff.hpp"

namespace avvp {

const Tensor& Var::value() const { return graph->value(id); }

// ---------------------------------------------------------------- ParameterSet

void ParameterSet::add(const std::string& name, Tensor value) {
  if (!tensors_.emplace(name, std::move(value)).second) {
    throw ContractError("duplicate parameter '" + name + "'");
  }
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterSet::coordinate_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& [name, t] : tensors_) out.add(name, Tensor::zeros(t.shape()));
  return out;
}

bool ParameterSet::identical(const ParameterSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  auto it = other.tensors_.begin();
  for (const auto& [name, t] : tensors_) {
    if (name != it->first || !t.identical(it->second)) return false;
    ++it;
  }
  return true;
}

// ---------------------------------------------------------------- Graph

void GradientSink::accumulate(std::size_t node, const Tensor& grad) {
  auto& slot = slots_[node];
  if (!slot) {
    slot = grad;
  } else {
    auto dst = slot->data();
    auto src = grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, std::nullopt});
  return Var{this, nodes_.size() - 1};
}

Var Graph::parameter(const std::string& name, Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, name});
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  for (auto id : inputs) {
    if (id >= nodes_.size()) throw ContractError("operation input is not a node of this graph");
  }
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward), std::nullopt});
  return Var{this, nodes_.size() - 1};
}

Gradients Graph::backward(Var loss) const {
  if (loss.graph != this) throw ContractError("backward: loss belongs to another graph");
  if (value(loss.id).size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_string(value(loss.id).shape()));
  }
  std::vector<std::optional<Tensor>> slots(nodes_.size());
  slots[loss.id] = Tensor::full(value(loss.id).shape(), 1.0);
  GradientSink sink(slots);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (!slots[i] || !nodes_[i].backward) continue;
    nodes_[i].backward(*this, i, *slots[i], sink);
  }
  return Gradients(*this, std::move(slots));
}

Gradients::Gradients(const Graph& graph, std::vector<std::optional<Tensor>> slots)
    : graph_(&graph), slots_(std::move(slots)) {}

Tensor Gradients::of(Var v) const {
  if (v.id < slots_.size() && slots_[v.id]) return *slots_[v.id];
  return Tensor::zeros(graph_->value(v.id).shape());
}

ParameterSet Gradients::parameters() const {
  ParameterSet out;
  for (std::size_t i = 0; i < graph_->nodes_.size(); ++i) {
    const auto& node = graph_->nodes_[i];
    if (!node.parameter_name) continue;
    out.add(*node.parameter_name, slots_[i] ? *slots_[i] : Tensor::zeros(node.value.shape()));
  }
  return out;
}

ParameterSet Gradients::for_parameters(const ParameterSet& params) const {
  ParameterSet found = parameters();
  ParameterSet out;
  for (const auto& [name, t] : params) {
    if (found.contains(name)) {
      const Tensor& g = found.at(name);
      if (g.shape() != t.shape()) {
        throw DimensionError("gradient for '" + name + "' has shape " + shape_string(g.shape()) +
                             ", parameter has " + shape_string(t.shape()));
      }
      out.add(name, g);
    } else {
      out.add(name, Tensor::zeros(t.shape()));
    }
  }
  return out;
}

BoundParameters::BoundParameters(Graph& graph, const ParameterSet& params) : graph_(&graph) {
  for (const auto& [name, t] : params) vars_.emplace(name, graph.parameter(name, t));
}

Var BoundParameters::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ContractError("parameter '" + name + "' is not bound");
  return it->second;
}

}  // namespace avvp
