#include "doctest.h"

#include <cmath>

#include "baryvae/diffgraph.hpp"
#include "baryvae/errors.hpp"
#include "primitive_cases.hpp"

using namespace baryvae;
using namespace baryvae::ad;
using testing::primitive_store;
using testing::random_matrix;
using testing::readout;
using testing::wrap;

TEST_CASE("forward_backward examples") {
  ParamStore s;
  s.add("x", Matrix(1, 2, std::vector<double>{1.0, 2.0}));
  const auto fb = forward_backward(
      [](Tape& t, const ParamStore& st) { return sum(square(t.param(st, "x"))); }, s);
  CHECK(fb.loss == 5.0);
  CHECK(fb.gradients.at("x").data == std::vector<double>{2.0, 4.0});

  const auto constant = forward_backward(
      [](Tape& t, const ParamStore&) { return t.constant(Matrix(1, 1, 3.0)); }, s);
  CHECK(constant.loss == 3.0);
  CHECK(constant.gradients.at("x").data == std::vector<double>{0.0, 0.0});

  CHECK_THROWS_AS(forward_backward([](Tape& t, const ParamStore& st) { return t.param(st, "x"); },
                                   s),
                  DimensionError);
  CHECK_THROWS_AS(forward_backward(
                      [](Tape& t, const ParamStore& st) { return sum(log(scale(t.param(st, "x"), -1.0))); },
                      s),
                  NumericError);
}

TEST_CASE("shape errors surface at build time") {
  Tape t;
  const Value a = t.constant(Matrix(2, 3));
  const Value b = t.constant(Matrix(2, 2));
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
  CHECK_THROWS_AS(add(a, b), DimensionError);
  CHECK_THROWS_AS(add_row(a, b), DimensionError);
  CHECK_THROWS_AS(concat_rows({a, b}), DimensionError);
}

TEST_CASE("ParamStore") {
  ParamStore s;
  s.add("w", Matrix(2, 2));
  CHECK_THROWS(s.add("w", Matrix(1, 1)));
  CHECK(s.contains("w"));
  CHECK_FALSE(s.contains("v"));
  CHECK(s.num_scalars() == 4);
  CHECK_THROWS(s.value("v"));
}

TEST_CASE("every primitive passes grad_check") {
  const auto cases = testing::primitive_cases();
  for (const auto& c : cases) {
    ParamStore store = primitive_store(7, c.lo, c.hi);
    const double err = grad_check(wrap(c.op), store, 1e-5);
    INFO(c.name);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("matmul, add_row and dense pass grad_check") {
  ParamStore store = testing::layered_store(8);
  CHECK(grad_check(testing::layered_graph, store, 1e-5) < 1e-6);
}

TEST_CASE("grad_check catches injected faults and linear losses are exact") {
  ParamStore store = primitive_store(9, -1, 1);
  const auto linear = wrap([](Tape&, Value a, Value b) { return add(scale(a, 3.0), b); });
  CHECK(grad_check(linear, store, 1e-5) < 1e-10);

  const auto chain = wrap([](Tape&, Value a, Value) { return softplus(softplus(a)); });
  CHECK(grad_check(chain, store, 1e-5) < 1e-6);

  const double broken = grad_check(chain, store, 1e-5, 0, [](Gradients& g) {
    g.at("a").data[3] += 0.5;
  });
  CHECK(broken > 1e-2);
}

TEST_CASE("grad_check samples large stores deterministically") {
  CounterRng rng(10, 0);
  ParamStore store;
  store.add("big", random_matrix(120, 100, rng, -1, 1));
  const GraphBuilder build = [](Tape& t, const ParamStore& s) {
    return sum(ad::tanh(t.param(s, "big")));
  };
  const double e1 = grad_check(build, store, 1e-5, 3);
  const double e2 = grad_check(build, store, 1e-5, 3);
  CHECK(e1 == e2);
  CHECK(e1 < 1e-6);
}

TEST_CASE("adam_step") {
  ParamStore s;
  s.add("x", Matrix(1, 2, std::vector<double>{1.0, -1.0}));
  Gradients zero{{"x", Matrix(1, 2, 0.0)}};
  adam_step(s, zero);
  CHECK(s.value("x").data == std::vector<double>{1.0, -1.0});
  CHECK(s.step() == 1);

  ParamStore t;
  t.add("x", Matrix(1, 2, std::vector<double>{1.0, -1.0}));
  Gradients g{{"x", Matrix(1, 2, std::vector<double>{0.3, -2.0})}};
  adam_step(t, g);
  // m_hat = g and v_hat = g^2 after one step, so each move is lr * g / (|g| + eps).
  CHECK(t.value("x").data[0] == doctest::Approx(1.0 - 1e-3 * 0.3 / (0.3 + 1e-8)).epsilon(1e-14));
  CHECK(t.value("x").data[1] == doctest::Approx(-1.0 + 1e-3 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));

  Gradients missing;
  CHECK_THROWS_AS(adam_step(t, missing), InvalidArgument);
  Gradients wrong{{"x", Matrix(2, 1)}};
  CHECK_THROWS_AS(adam_step(t, wrong), DimensionError);

  // Scalar quadratic (x - 3)^2.
  ParamStore q;
  q.add("x", Matrix(1, 1, 0.0));
  const GraphBuilder loss = [](Tape& tape, const ParamStore& st) {
    return sum(square(add_scalar(tape.param(st, "x"), -3.0)));
  };
  const double before = forward_only(loss, q);
  for (int i = 0; i < 2; ++i) adam_step(q, forward_backward(loss, q).gradients, {0.1});
  CHECK(forward_only(loss, q) < before);
}

TEST_CASE("determinism of losses and gradients") {
  auto run = [] {
    CounterRng rng(4, 0);
    ParamStore s;
    init_dense(s, "l", 3, 3, rng);
    s.add("x", random_matrix(4, 3, rng, -1, 1));
    return forward_backward(
        [](Tape& t, const ParamStore& st) { return sum(softplus(dense(t, st, "l", t.param(st, "x")))); },
        s);
  };
  const auto a = run(), b = run();
  CHECK(a.loss == b.loss);
  CHECK(a.gradients == b.gradients);
}
