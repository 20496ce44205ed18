#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "avvp/autodiff.hpp"
#include "avvp/tensor_ops.hpp"

namespace avvp {

namespace {

Graph& graph_of(Var a, Var b) {
  if (a.graph != b.graph) throw ContractError("operands belong to different graphs");
  return *a.graph;
}

template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor out(x.shape());
  auto o = out.data();
  auto xd = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(xd[i]);
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  return g.record(kernels::matmul(a.value(), b.value()), {a.id, b.id},
                  [a = a.id, b = b.id](const Graph& g, std::size_t, const Tensor& up, GradientSink& sink) {
                    sink.accumulate(a, kernels::matmul(up, kernels::transpose(g.value(b))));
                    sink.accumulate(b, kernels::matmul(kernels::transpose(g.value(a)), up));
                  });
}

Var transpose(Var a) {
  return a.graph->record(kernels::transpose(a.value()), {a.id},
                         [a = a.id](const Graph&, std::size_t, const Tensor& up, GradientSink& sink) {
                           sink.accumulate(a, kernels::transpose(up));
                         });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  return g.record(kernels::add(a.value(), b.value()), {a.id, b.id},
                  [a = a.id, b = b.id](const Graph&, std::size_t, const Tensor& up, GradientSink& sink) {
                    sink.accumulate(a, up);
                    sink.accumulate(b, up);
                  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  return g.record(kernels::sub(a.value(), b.value()), {a.id, b.id},
                  [a = a.id, b = b.id](const Graph&, std::size_t, const Tensor& up, GradientSink& sink) {
                    sink.accumulate(a, up);
                    sink.accumulate(b, kernels::scale(up, -1.0));
                  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  return g.record(kernels::mul(a.value(), b.value()), {a.id, b.id},
                  [a = a.id, b = b.id](const Graph& g, std::size_t, const Tensor& up, GradientSink& sink) {
                    sink.accumulate(a, kernels::mul(up, g.value(b)));
                    sink.accumulate(b, kernels::mul(up, g.value(a)));
                  });
}

Var scale(Var a, double s) {
  return a.graph->record(kernels::scale(a.value(), s), {a.id},
                         [a = a.id, s](const Graph&, std::size_t, const Tensor& up, GradientSink& sink) {
                           sink.accumulate(a, kernels::scale(up, s));
                         });
}

Var add_scalar(Var a, double s) {
  return a.graph->record(map_values(a.value(), [s](double v) { return v + s; }), {a.id},
                         [a = a.id](const Graph&, std::size_t, const Tensor& up, GradientSink& sink) {
                           sink.accumulate(a, up);
                         });
}

Var add_rows(Var a, Var row) {
  Graph& g = graph_of(a, row);
  return g.record(kernels::add_rows(a.value(), row.value()), {a.id, row.id},
                  [a = a.id, row = row.id](const Graph&, std::size_t, const Tensor& up, GradientSink& sink) {
                    sink.accumulate(a, up);
                    sink.accumulate(row, kernels::sum_along_axis(up, 0));
                  });
}

Var sum_along_axis(Var x, std::size_t axis) {
  const std::size_t len = x.value().dim(axis);
  return x.graph->record(kernels::sum_along_axis(x.value(), axis), {x.id},
                         [x = x.id, axis, len](const Graph&, std::size_t, const Tensor& up, GradientSink& sink) {
                           sink.accumulate(x, kernels::expand_along_axis(up, axis, len));
                         });
}

Var sum(Var x) {
  const auto d = x.value().data();
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  return x.graph->record(Tensor::scalar(total), {x.id},
                         [x = x.id](const Graph& g, std::size_t, const Tensor& up, GradientSink& sink) {
                           sink.accumulate(x, Tensor::full(g.value(x).shape(), up.item()));
                         });
}

Var softmax(Var x, std::size_t axis) {
  // dx_i = y_i * (up_i - sum_j up_j y_j) along the axis.
  return x.graph->record(
      kernels::softmax(x.value(), axis), {x.id},
      [x = x.id, axis](const Graph& g, std::size_t self, const Tensor& up, GradientSink& sink) {
        const Tensor& y = g.value(self);
        const auto v = kernels::axis_view(y.shape(), axis);
        Tensor dx(y.shape());
        auto yd = y.data();
        auto ud = up.data();
        auto dd = dx.data();
        for (std::size_t a = 0; a < v.outer; ++a) {
          for (std::size_t k = 0; k < v.inner; ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < v.len; ++i) {
              const std::size_t at = (a * v.len + i) * v.inner + k;
              dot += ud[at] * yd[at];
            }
            for (std::size_t i = 0; i < v.len; ++i) {
              const std::size_t at = (a * v.len + i) * v.inner + k;
              dd[at] = yd[at] * (ud[at] - dot);
            }
          }
        }
        sink.accumulate(x, dx);
      });
}

Var sigmoid(Var x) {
  return x.graph->record(kernels::sigmoid(x.value()), {x.id},
                         [x = x.id](const Graph& g, std::size_t self, const Tensor& up, GradientSink& sink) {
                           const Tensor& y = g.value(self);
                           Tensor dx(y.shape());
                           for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = up[i] * y[i] * (1.0 - y[i]);
                           sink.accumulate(x, dx);
                         });
}

Var log(Var x) {
  return x.graph->record(map_values(x.value(), [](double v) { return std::log(v); }), {x.id},
                         [x = x.id](const Graph& g, std::size_t, const Tensor& up, GradientSink& sink) {
                           const Tensor& in = g.value(x);
                           Tensor dx(in.shape());
                           for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = up[i] / in[i];
                           sink.accumulate(x, dx);
                         });
}

Var clamp(Var x, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo must not exceed hi");
  return x.graph->record(map_values(x.value(), [lo, hi](double v) { return std::clamp(v, lo, hi); }), {x.id},
                         [x = x.id, lo, hi](const Graph& g, std::size_t, const Tensor& up, GradientSink& sink) {
                           const Tensor& in = g.value(x);
                           Tensor dx(in.shape());
                           for (std::size_t i = 0; i < dx.size(); ++i) {
                             dx[i] = (in[i] > lo && in[i] < hi) ? up[i] : 0.0;
                           }
                           sink.accumulate(x, dx);
                         });
}

Var stack(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("stack: no inputs");
  std::vector<Tensor> values;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.graph != parts[0].graph) throw ContractError("operands belong to different graphs");
    values.push_back(p.value());
    ids.push_back(p.id);
  }
  return parts[0].graph->record(kernels::stack(values, axis), ids,
                                [ids, axis](const Graph&, std::size_t, const Tensor& up, GradientSink& sink) {
                                  for (std::size_t i = 0; i < ids.size(); ++i) {
                                    sink.accumulate(ids[i], kernels::select(up, axis, i));
                                  }
                                });
}

Var select(Var x, std::size_t axis, std::size_t index) {
  return x.graph->record(
      kernels::select(x.value(), axis, index), {x.id},
      [x = x.id, axis, index](const Graph& g, std::size_t, const Tensor& up, GradientSink& sink) {
        const Tensor& in = g.value(x);
        const auto v = kernels::axis_view(in.shape(), axis);
        Tensor dx(in.shape());
        auto dd = dx.data();
        auto ud = up.data();
        for (std::size_t a = 0; a < v.outer; ++a)
          for (std::size_t k = 0; k < v.inner; ++k) dd[(a * v.len + index) * v.inner + k] = ud[a * v.inner + k];
        sink.accumulate(x, dx);
      });
}

Var reshape(Var x, Shape shape) {
  return x.graph->record(x.value().reshaped(std::move(shape)), {x.id},
                         [x = x.id](const Graph& g, std::size_t, const Tensor& up, GradientSink& sink) {
                           sink.accumulate(x, up.reshaped(g.value(x).shape()));
                         });
}

Var unary_map(Var x, std::function<double(double)> f, std::function<double(double)> df) {
  return x.graph->record(map_values(x.value(), f), {x.id},
                         [x = x.id, df = std::move(df)](const Graph& g, std::size_t, const Tensor& up,
                                                        GradientSink& sink) {
                           const Tensor& in = g.value(x);
                           Tensor dx(in.shape());
                           for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = up[i] * df(in[i]);
                           sink.accumulate(x, dx);
                         });
}

// ---------------------------------------------------------------- gradcheck

namespace {

double evaluate_loss(const LossBuilder& build, const ParameterSet& params) {
  Graph g;
  BoundParameters bound(g, params);
  return build(g, bound).value().item();
}

}  // namespace

GradcheckResult gradcheck_detailed(const LossBuilder& build, const ParameterSet& params,
                                   const GradcheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw ContractError("gradcheck: epsilon must be positive");

  Graph g;
  BoundParameters bound(g, params);
  const Gradients grads = g.backward(build(g, bound));
  const ParameterSet analytic = grads.for_parameters(params);

  struct Coordinate {
    std::string name;
    std::size_t index;
  };
  std::vector<Coordinate> all;
  for (const auto& [name, t] : params)
    for (std::size_t i = 0; i < t.size(); ++i) all.push_back({name, i});

  std::vector<Coordinate> picked;
  std::mt19937_64 rng(options.seed);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), std::min(options.coordinates, all.size()), rng);

  GradcheckResult result;
  ParameterSet probe = params;
  for (const auto& c : picked) {
    double& slot = probe.at(c.name)[c.index];
    const double original = slot;
    slot = original + options.epsilon;
    const double plus = evaluate_loss(build, probe);
    slot = original - options.epsilon;
    const double minus = evaluate_loss(build, probe);
    slot = original;

    const double fd = (plus - minus) / (2.0 * options.epsilon);
    const double ad = analytic.at(c.name)[c.index];
    const double err = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
    result.max_relative_error = std::max(result.max_relative_error, err);
    ++result.coordinates_checked;
  }
  return result;
}

double gradcheck(const LossBuilder& build, const ParameterSet& params, const GradcheckOptions& options) {
  return gradcheck_detailed(build, params, options).max_relative_error;
}

}  // namespace avvp
