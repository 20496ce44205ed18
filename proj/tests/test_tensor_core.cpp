#include <cmath>
#include <functional>
#include <random>

#include "avvp/autodiff.hpp"
#include "avvp/tensor_ops.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace avvp;
using fixtures::max_abs_diff;
using fixtures::random_tensor;

TEST_CASE("tensor construction enforces shape/data agreement") {
  CHECK(Tensor({2, 3}).size() == 6);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  CHECK_THROWS_AS(Tensor::vector({1.0, 2.0}).item(), DimensionError);
  CHECK(Tensor::matrix({{1, 2}, {3, 4}})(1, 0) == 3.0);
}

TEST_CASE("matmul") {
  const Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(kernels::matmul(Tensor::identity(2), m).identical(m));
  CHECK(kernels::matmul(Tensor::matrix({{1, 0}}), Tensor::matrix({{2}, {3}})).identical(Tensor::matrix({{2}})));

  SUBCASE("random 3x4 by 4x2 against a triple loop") {
    std::mt19937_64 rng(11);
    const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    Tensor ref({3, 2});
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < 4; ++k) ref(i, j) += a(i, k) * b(k, j);
    CHECK(max_abs_diff(kernels::matmul(a, b), ref) <= 1e-12);
  }

  SUBCASE("mismatch names both shapes") {
    try {
      kernels::matmul(Tensor({2, 3}), Tensor({2, 3}));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x3]") != std::string::npos);
      CHECK(msg.find("[2x3]", msg.find("[2x3]") + 1) != std::string::npos);
    }
  }
}

TEST_CASE("softmax") {
  const Tensor half = kernels::softmax(Tensor::vector({0, 0}), 0);
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);
  const Tensor big = kernels::softmax(Tensor::vector({1000, 1000}), 0);
  CHECK(big[0] == 0.5);
  CHECK(big[1] == 0.5);
  const Tensor q = kernels::softmax(Tensor::vector({std::log(1.0), std::log(3.0)}), 0);
  CHECK(q[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(q[1] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("softmax slices sum to one for every axis of random finite inputs") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor x = random_tensor({3, 4, 5}, rng, -50.0, 50.0);
    for (std::size_t axis = 0; axis < 3; ++axis) {
      const Tensor s = kernels::softmax(x, axis);
      const Tensor sums = kernels::sum_along_axis(s, axis);
      for (double v : sums.data()) REQUIRE(std::abs(v - 1.0) <= 1e-12);
      for (double v : s.data()) REQUIRE(std::isfinite(v));
    }
  }
}

TEST_CASE("sigmoid") {
  CHECK(kernels::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  const double tiny = kernels::sigmoid(Tensor::scalar(-40.0)).item();
  CHECK(tiny > 0.0);
  CHECK(tiny < 1e-17);
  CHECK(kernels::sigmoid(Tensor::scalar(std::log(3.0))).item() == doctest::Approx(0.75).epsilon(1e-15));
  const double sat = kernels::sigmoid(Tensor::scalar(40.0)).item();
  CHECK(sat < 1.0);
  const double floor = kernels::sigmoid(Tensor::scalar(-1e6)).item();
  CHECK(floor > 0.0);
  CHECK(kernels::sigmoid(Tensor::scalar(1e6)).item() < 1.0);
}

TEST_CASE("elementwise and reductions") {
  CHECK(kernels::mul(Tensor::vector({1, 2}), Tensor::vector({3, 4})).identical(Tensor::vector({3, 8})));
  CHECK(kernels::sum_along_axis(Tensor::matrix({{1, 2}, {3, 4}}), 0).identical(Tensor::vector({4, 6})));
  const Tensor zero = kernels::scale(Tensor::vector({1, -1}), 0.0);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
  CHECK_THROWS_AS(kernels::add(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), DimensionError);
  CHECK_THROWS_AS(kernels::softmax(Tensor::vector({1, 2}), 1), DimensionError);
}

TEST_CASE("backward") {
  const Tensor p0 = Tensor::vector({0.5, -2.0, 3.0});

  SUBCASE("sum(p) gives ones") {
    Graph g;
    const Var p = g.parameter("p", p0);
    const Tensor grad = g.backward(sum(p)).of(p);
    CHECK(grad.identical(Tensor::vector({1, 1, 1})));
  }
  SUBCASE("sum(p*p) gives 2p") {
    Graph g;
    const Var p = g.parameter("p", p0);
    const Tensor grad = g.backward(sum(mul(p, p))).of(p);
    CHECK(grad.identical(Tensor::vector({1.0, -4.0, 6.0})));
  }
  SUBCASE("unused parameters receive zero gradients of their own shape") {
    Graph g;
    const Var p = g.parameter("p", p0);
    const Var unused = g.parameter("q", Tensor::matrix({{1, 2}, {3, 4}}));
    const Gradients grads = g.backward(sum(p));
    const Tensor gq = grads.of(unused);
    CHECK(gq.shape() == Shape{2, 2});
    for (double v : gq.data()) CHECK(v == 0.0);
    CHECK(grads.parameters().at("q").shape() == Shape{2, 2});
  }
  SUBCASE("non-scalar loss is a contract error") {
    Graph g;
    const Var p = g.parameter("p", p0);
    CHECK_THROWS_AS(g.backward(scale(p, 2.0)), ContractError);
  }
  SUBCASE("gradient shapes mirror parameter shapes") {
    ParameterSet params;
    params.add("w", Tensor({3, 2}));
    params.add("b", Tensor({2}));
    Graph g;
    BoundParameters bp(g, params);
    const Var x = g.constant(Tensor::full({4, 3}, 1.0));
    const Var loss = sum(sigmoid(add_rows(matmul(x, bp["w"]), bp["b"])));
    const ParameterSet grads = g.backward(loss).for_parameters(params);
    for (const auto& [name, t] : params) CHECK(grads.at(name).shape() == t.shape());
  }
}

TEST_CASE("nodes are stored in topological order") {
  Graph g;
  const Var a = g.parameter("a", Tensor::vector({1, 2}));
  const Var b = g.constant(Tensor::vector({3, 4}));
  sum(softmax(mul(add(a, b), a), 0));
  for (std::size_t id = 0; id < g.size(); ++id) {
    for (std::size_t in : g.inputs(id)) CHECK(in < id);
  }
}

TEST_CASE("gradcheck controls") {
  std::mt19937_64 rng(5);
  ParameterSet params;
  params.add("x", random_tensor({4, 3}, rng));

  SUBCASE("quadratic loss is exact to rounding") {
    const LossBuilder quad = [](Graph&, const BoundParameters& p) {
      return add(sum(mul(p["x"], p["x"])), sum(scale(p["x"], 3.0)));
    };
    CHECK(gradcheck(quad, params) < 1e-9);
  }
  SUBCASE("corrupted adjoint is caught") {
    const LossBuilder wrong = [](Graph&, const BoundParameters& p) {
      // d/dx x^3 reported as 2x^2.
      const Var cubed = unary_map(
          p["x"], [](double v) { return v * v * v; }, [](double v) { return 2.0 * v * v; });
      return sum(cubed);
    };
    CHECK(gradcheck(wrong, params) > 1e-2);
  }
  SUBCASE("coordinate count is respected") {
    const LossBuilder f = [](Graph&, const BoundParameters& p) { return sum(mul(p["x"], p["x"])); };
    GradcheckOptions opt;
    opt.coordinates = 5;
    CHECK(gradcheck_detailed(f, params, opt).coordinates_checked == 5);
    opt.coordinates = 1000;
    CHECK(gradcheck_detailed(f, params, opt).coordinates_checked == 12);
  }
}

namespace {

// Contracts op output against fixed random weights so every output entry
// reaches the loss with a distinct upstream gradient.
Var weighted_sum(Graph& g, Var y, std::mt19937_64& rng) {
  return sum(mul(y, g.constant(random_tensor(y.shape(), rng))));
}

struct OpCase {
  const char* name;
  std::function<ParameterSet(std::mt19937_64&)> inputs;
  std::function<Var(const BoundParameters&)> apply;
};

std::vector<OpCase> op_cases() {
  auto one = [](Shape s, double lo = -1.0, double hi = 1.0) {
    return [=](std::mt19937_64& rng) {
      ParameterSet p;
      p.add("a", random_tensor(s, rng, lo, hi));
      return p;
    };
  };
  auto two = [](Shape sa, Shape sb) {
    return [=](std::mt19937_64& rng) {
      ParameterSet p;
      p.add("a", random_tensor(sa, rng));
      p.add("b", random_tensor(sb, rng));
      return p;
    };
  };
  return {
      {"matmul", two({3, 4}, {4, 2}), [](const BoundParameters& p) { return matmul(p["a"], p["b"]); }},
      {"transpose", one({3, 4}), [](const BoundParameters& p) { return transpose(p["a"]); }},
      {"add", two({2, 3}, {2, 3}), [](const BoundParameters& p) { return add(p["a"], p["b"]); }},
      {"sub", two({2, 3}, {2, 3}), [](const BoundParameters& p) { return sub(p["a"], p["b"]); }},
      {"mul", two({2, 3}, {2, 3}), [](const BoundParameters& p) { return mul(p["a"], p["b"]); }},
      {"scale", one({5}), [](const BoundParameters& p) { return scale(p["a"], -1.7); }},
      {"add_scalar", one({5}), [](const BoundParameters& p) { return add_scalar(p["a"], 0.3); }},
      {"add_rows", two({4, 3}, {3}), [](const BoundParameters& p) { return add_rows(p["a"], p["b"]); }},
      {"sum_along_axis 0", one({3, 2, 4}), [](const BoundParameters& p) { return sum_along_axis(p["a"], 0); }},
      {"sum_along_axis 1", one({3, 2, 4}), [](const BoundParameters& p) { return sum_along_axis(p["a"], 1); }},
      {"sum_along_axis 2", one({3, 2, 4}), [](const BoundParameters& p) { return sum_along_axis(p["a"], 2); }},
      {"sum", one({3, 4}), [](const BoundParameters& p) { return scale(sum(p["a"]), 1.3); }},
      {"softmax 0", one({4, 2, 3}, -3.0, 3.0), [](const BoundParameters& p) { return softmax(p["a"], 0); }},
      {"softmax 1", one({4, 2, 3}, -3.0, 3.0), [](const BoundParameters& p) { return softmax(p["a"], 1); }},
      {"softmax 2", one({4, 2, 3}, -3.0, 3.0), [](const BoundParameters& p) { return softmax(p["a"], 2); }},
      {"sigmoid", one({6}, -4.0, 4.0), [](const BoundParameters& p) { return sigmoid(p["a"]); }},
      {"log", one({6}, 0.2, 3.0), [](const BoundParameters& p) { return log(p["a"]); }},
      {"clamp", one({6}, 0.2, 0.8), [](const BoundParameters& p) { return clamp(p["a"], 0.1, 0.9); }},
      {"stack", two({3, 2}, {3, 2}),
       [](const BoundParameters& p) {
         const std::array<Var, 2> parts{p["a"], p["b"]};
         return stack(parts, 1);
       }},
      {"select", one({3, 2, 4}), [](const BoundParameters& p) { return select(p["a"], 1, 1); }},
      {"reshape", one({3, 4}), [](const BoundParameters& p) { return reshape(p["a"], {2, 6}); }},
  };
}

}  // namespace

TEST_CASE("every operation passes gradcheck over 100 seeds") {
  for (const auto& op : op_cases()) {
    CAPTURE(op.name);
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed);
      const ParameterSet params = op.inputs(rng);
      const std::uint64_t weight_seed = rng();
      const LossBuilder f = [&](Graph& g, const BoundParameters& p) {
        std::mt19937_64 wr(weight_seed);
        return weighted_sum(g, op.apply(p), wr);
      };
      GradcheckOptions opt;
      opt.seed = seed;
      worst = std::max(worst, gradcheck(f, params, opt));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("graph evaluation is deterministic") {
  std::mt19937_64 rng(9);
  const Tensor a = random_tensor({4, 3}, rng), b = random_tensor({3, 5}, rng);
  auto run = [&] {
    Graph g;
    const Var x = g.parameter("a", a), y = g.parameter("b", b);
    const Var out = softmax(sigmoid(matmul(x, y)), 1);
    return std::make_pair(out.value(), g.backward(sum(mul(out, out))).of(x));
  };
  const auto r1 = run(), r2 = run();
  CHECK(r1.first.identical(r2.first));
  CHECK(r1.second.identical(r2.second));
}
