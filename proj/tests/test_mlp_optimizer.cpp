#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "edd/mlp.hpp"
#include "edd/optimizer.hpp"
#include "edd/oracles.hpp"

using namespace edd;

namespace {

// Scalar-loop forward pass used as an independent reference.
std::vector<double> hand_forward(const Mlp& net, const std::vector<double>& x) {
  const auto widths = net.spec().widths();
  std::vector<double> a = x;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const matrix_t& w = net.params().at("W" + std::to_string(l));
    const matrix_t& b = net.params().at("b" + std::to_string(l));
    std::vector<double> next(static_cast<std::size_t>(widths[l + 1]));
    for (Eigen::Index o = 0; o < widths[l + 1]; ++o) {
      double s = b(0, o);
      for (Eigen::Index i = 0; i < widths[l]; ++i) s += a[static_cast<std::size_t>(i)] * w(i, o);
      const bool last = l + 2 == widths.size();
      next[static_cast<std::size_t>(o)] =
          last ? s : (net.spec().activation == Activation::tanh ? std::tanh(s) : std::max(0.0, s));
    }
    a = std::move(next);
  }
  return a;
}

}  // namespace

TEST_CASE("two-layer tanh MLP forward pass at 0.5") {
  const Mlp net(MlpSpec{1, {10, 10}, Activation::tanh, 1, 42});
  const double ref = hand_forward(net, {0.5})[0];
  const matrix_t x = matrix_t::Constant(1, 1, 0.5);
  CHECK(net.predict(x)(0, 0) == doctest::Approx(ref).epsilon(1e-14));
  Graph g;
  net.build(g, g.input("x"));
  CHECK(g.forward({{"x", x}}, net.params())(0, 0) == doctest::Approx(ref).epsilon(1e-14));
  // Golden value pinned after the scalar-loop reference above agreed.
  CHECK(ref == doctest::Approx(-0.054863302045972673).epsilon(1e-14));
}

TEST_CASE("MLP forward agrees with the scalar reference on random inputs") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (Activation act : {Activation::tanh, Activation::relu}) {
    const Mlp net(MlpSpec{3, {7, 4}, act, 2, 9});
    for (int t = 0; t < 20; ++t) {
      const std::vector<double> x{n(rng), n(rng), n(rng)};
      const auto ref = hand_forward(net, x);
      matrix_t xm(1, 3);
      xm << x[0], x[1], x[2];
      const matrix_t out = net.predict(xm);
      CHECK(out(0, 0) == doctest::Approx(ref[0]).epsilon(1e-13));
      CHECK(out(0, 1) == doctest::Approx(ref[1]).epsilon(1e-13));
    }
  }
}

TEST_CASE("Glorot initialisation") {
  const Mlp net(MlpSpec{4, {6}, Activation::tanh, 3, 1});
  CHECK(net.params().at("W0").rows() == 4);
  CHECK(net.params().at("W0").cols() == 6);
  CHECK(net.params().at("W0").cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 10.0));
  CHECK(net.params().at("W1").cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 9.0));
  CHECK(net.params().at("b0").isZero());
  CHECK(net.params().at("b1").isZero());
  const Mlp other(MlpSpec{4, {6}, Activation::tanh, 3, 2});
  CHECK_FALSE(net.params().at("W0") == other.params().at("W0"));
  CHECK(Mlp(MlpSpec{4, {6}, Activation::tanh, 3, 1}) == net);
}

TEST_CASE("MlpSpec validation") {
  CHECK_THROWS_AS(Mlp(MlpSpec{1, {}, Activation::tanh, 1, 0}), InputError);
  CHECK_THROWS_AS(Mlp(MlpSpec{1, {0}, Activation::tanh, 1, 0}), InputError);
  CHECK_THROWS_AS(Mlp(MlpSpec{1, {3}, Activation::tanh, 0, 0}), InputError);
  CHECK(parse_activation("relu") == Activation::relu);
  CHECK_THROWS_AS(parse_activation("sigmoid"), InputError);
}

TEST_CASE("MLP gradients match finite differences") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n;
  for (int t = 0; t < 10; ++t) {
    const Mlp net(MlpSpec{2, {5}, t % 2 ? Activation::relu : Activation::tanh, 2, static_cast<seed_t>(t)});
    matrix_t x(4, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    Graph g;
    g.sum(g.square(net.build(g, g.input("x"))));
    g.forward({{"x", x}}, net.params());
    const ParameterSet grad = g.backward(net.params());
    const ParameterSet fd = oracles::finite_difference_gradient(
        [&](const ParameterSet& p) { return g.forward({{"x", x}}, p)(0, 0); }, net.params());
    CHECK(oracles::max_relative_error(grad, fd) < 1e-4);
  }
}

TEST_CASE("Adam with zero gradients leaves parameters unchanged") {
  ParameterSet p;
  p.add("w", matrix_t::Constant(2, 3, 0.7));
  OptimizerState s = OptimizerState::for_params(p);
  const ParameterSet before = p;
  adam_step(s, p, p.zeros_like());
  CHECK(p == before);
  CHECK(s.step_count == 1);
}

TEST_CASE("first Adam step moves by the learning rate") {
  ParameterSet p;
  p.add("w", matrix_t::Constant(2, 2, 1.0));
  ParameterSet g;
  g.add("w", matrix_t::Ones(2, 2));
  OptimizerState s = OptimizerState::for_params(p, AdamConfig{1e-3});
  adam_step(s, p, g);
  // m_hat = 1, v_hat = 1, step = lr / (1 + eps).
  for (Eigen::Index i = 0; i < 4; ++i)
    CHECK(p.at("w").data()[i] == doctest::Approx(1.0 - 1e-3 / (1 + 1e-8)).epsilon(1e-15));
}

TEST_CASE("Adam decreases a quadratic") {
  ParameterSet p;
  p.add("w", matrix_t::Constant(1, 3, 2.0));
  OptimizerState s = OptimizerState::for_params(p, AdamConfig{0.1});
  auto loss = [](const ParameterSet& q) { return q.at("w").squaredNorm(); };
  const double l0 = loss(p);
  for (int k = 0; k < 2; ++k) {
    ParameterSet g;
    g.add("w", 2 * p.at("w"));
    adam_step(s, p, g);
  }
  CHECK(loss(p) < l0);
  CHECK(s.step_count == 2);
}

TEST_CASE("non-finite gradients are rejected by name without side effects") {
  ParameterSet p;
  p.add("a", matrix_t::Ones(1, 1));
  p.add("b", matrix_t::Ones(1, 2));
  ParameterSet g = p.zeros_like();
  g.at("a")(0, 0) = 1.0;
  g.at("b")(0, 1) = std::numeric_limits<double>::quiet_NaN();
  OptimizerState s = OptimizerState::for_params(p);
  const ParameterSet before = p;
  try {
    adam_step(s, p, g);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  CHECK(p == before);
  CHECK(s.step_count == 0);
}

TEST_CASE("learning-rate schedule") {
  CHECK(lr_schedule(1, 1e-3, 0.8) == 1e-3);
  CHECK(lr_schedule(2, 1e-3, 0.8) == doctest::Approx(5.7434917749851749e-4).epsilon(1e-14));
  CHECK(lr_schedule(7, 1e-3, 0.0) == 1e-3);
  CHECK_THROWS_AS(lr_schedule(0, 1e-3, 0.8), InputError);
  CHECK(schedule_step(0, 20) == 1);
  CHECK(schedule_step(19, 20) == 1);
  CHECK(schedule_step(20, 20) == 2);
  CHECK(schedule_step(45, 20) == 3);
}
