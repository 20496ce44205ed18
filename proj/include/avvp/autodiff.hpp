#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avvp/tensor.hpp"

namespace avvp {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Ordered name -> tensor map holding trainable parameters.
class ParameterSet {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t size() const { return tensors_.size(); }
  std::size_t coordinate_count() const;
  ParameterSet zeros_like() const;

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  bool identical(const ParameterSet& other) const;

 private:
  std::map<std::string, Tensor> tensors_;
};

/// Accumulates adjoints during a backward sweep.
class GradientSink {
 public:
  explicit GradientSink(std::vector<std::optional<Tensor>>& slots) : slots_(slots) {}
  void accumulate(std::size_t node, const Tensor& grad);

 private:
  std::vector<std::optional<Tensor>>& slots_;
};

/// Adjoint of one node: receives the node's id and upstream gradient and
/// pushes contributions to its inputs.
using BackwardFn =
    std::function<void(const Graph& graph, std::size_t self, const Tensor& upstream, GradientSink& sink)>;

/// Result of Graph::backward.
class Gradients {
 public:
  Gradients(const Graph& graph, std::vector<std::optional<Tensor>> slots);

  /// Gradient of the loss with respect to `v`; zeros if `v` does not reach the loss.
  Tensor of(Var v) const;
  /// Gradients for every parameter node in the graph, keyed by name.
  ParameterSet parameters() const;
  /// Gradients shaped like `params`; parameters absent from the graph get zeros.
  ParameterSet for_parameters(const ParameterSet& params) const;

 private:
  const Graph* graph_;
  std::vector<std::optional<Tensor>> slots_;
};

/// Tape of operations. Nodes are appended in evaluation order, so the node
/// list is topologically sorted by construction.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var parameter(const std::string& name, Tensor value);

  /// Appends an operation node. `inputs` must already belong to this graph.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  std::size_t size() const { return nodes_.size(); }

  Gradients backward(Var loss) const;

 private:
  friend class Gradients;
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::optional<std::string> parameter_name;
  };
  std::deque<Node> nodes_;
};

/// Parameter nodes created from a ParameterSet.
class BoundParameters {
 public:
  BoundParameters(Graph& graph, const ParameterSet& params);
  Var operator[](const std::string& name) const;
  Graph& graph() const { return *graph_; }

 private:
  Graph* graph_;
  std::map<std::string, Var> vars_;
};

// Differentiable operations. Each records a node with its adjoint.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var add_rows(Var a, Var row);
Var sum_along_axis(Var x, std::size_t axis);
Var sum(Var x);
Var softmax(Var x, std::size_t axis);
Var sigmoid(Var x);
Var log(Var x);
/// Elementwise clamp; the gradient is passed through strictly inside [lo, hi] and zero elsewhere.
Var clamp(Var x, double lo, double hi);
Var stack(std::span<const Var> parts, std::size_t axis);
Var select(Var x, std::size_t axis, std::size_t index);
Var reshape(Var x, Shape shape);

/// Elementwise map with a caller-supplied derivative.
Var unary_map(Var x, std::function<double(double)> f, std::function<double(double)> df);

// Gradient checking against central finite differences.

using LossBuilder = std::function<Var(Graph&, const BoundParameters&)>;

struct GradcheckOptions {
  double epsilon = 1e-5;
  std::size_t coordinates = 20;
  std::uint64_t seed = 0;
};

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
};

GradcheckResult gradcheck_detailed(const LossBuilder& build, const ParameterSet& params,
                                   const GradcheckOptions& options = {});

/// Max over sampled coordinates of |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
double gradcheck(const LossBuilder& build, const ParameterSet& params, const GradcheckOptions& options = {});

}  // namespace avvp
