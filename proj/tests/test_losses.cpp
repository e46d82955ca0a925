#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "edd/losses.hpp"
#include "edd/oracles.hpp"
#include "edd/uncertainty.hpp"

using namespace edd;

namespace {

const double kLog2Pi = std::log(2 * std::numbers::pi);

vector_t vec(std::initializer_list<double> v) {
  vector_t out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

matrix_t randn(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double sd = 1) {
  std::normal_distribution<double> n(0, sd);
  matrix_t m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double softplus_ref(double z) { return std::log1p(std::exp(z)); }

// Network whose output is the constant `out` for every input.
Mlp constant_net(const vector_t& out, Eigen::Index input_dim = 1) {
  Mlp net(MlpSpec{input_dim, {3}, Activation::tanh, out.size(), 0});
  for (auto& [name, m] : net.params()) m.setZero();
  net.params().at("b1") = out.transpose();
  return net;
}

std::vector<EnsembleOutput> random_batch(std::size_t n, Eigen::Index m, const DistributionHead& head,
                                         std::mt19937_64& rng) {
  std::vector<EnsembleOutput> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({randn(m, head.param_dim(), rng), head});
  return out;
}

}  // namespace

TEST_CASE("ensemble_nll") {
  SUBCASE("Gaussian head at the targets with unit variance") {
    const double c = 1e-3;
    const double raw = std::log(std::expm1(1.0 - c));
    const matrix_t x = matrix_t::Random(4, 1);
    const matrix_t y = matrix_t::Constant(4, 1, 0.7);
    CHECK(ensemble_nll(x, y, constant_net(vec({0.7, raw})), DistributionHead::gaussian(c)) ==
          doctest::Approx(0.5 * kLog2Pi).epsilon(1e-14));
  }
  SUBCASE("categorical head certain of the true class") {
    const matrix_t x = matrix_t::Random(3, 1);
    const matrix_t y = matrix_t::Zero(3, 1);
    CHECK(ensemble_nll(x, y, constant_net(vec({1000.0})), DistributionHead::categorical(2)) == 0.0);
  }
  SUBCASE("random batch against per-sample sums") {
    std::mt19937_64 rng(1);
    const Mlp net(MlpSpec{2, {4}, Activation::tanh, 2, 3});
    const matrix_t x = randn(6, 2, rng);
    const matrix_t y = randn(6, 1, rng);
    const matrix_t z = net.predict(x);
    double total = 0;
    for (Eigen::Index i = 0; i < 6; ++i) {
      const double var = softplus_ref(z(i, 1)) + 1e-3;
      total += 0.5 * std::log(2 * std::numbers::pi * var) + (y(i, 0) - z(i, 0)) * (y(i, 0) - z(i, 0)) / (2 * var);
    }
    CHECK(ensemble_nll(x, y, net, DistributionHead::gaussian()) == doctest::Approx(total / 6).epsilon(1e-13));

    const Mlp cls(MlpSpec{2, {4}, Activation::relu, 2, 4});
    const matrix_t labels = (matrix_t(6, 1) << 0, 2, 1, 1, 0, 2).finished();
    const matrix_t logits = cls.predict(x);
    double ce = 0;
    for (Eigen::Index i = 0; i < 6; ++i) {
      const vector_t p = probs_from_logits({logits.row(i).transpose()});
      ce -= std::log(p(static_cast<Eigen::Index>(labels(i, 0))));
    }
    CHECK(ensemble_nll(x, labels, cls, DistributionHead::categorical(3)) == doctest::Approx(ce / 6).epsilon(1e-13));
  }
  SUBCASE("non-finite loss names the sample") {
    matrix_t y = matrix_t::Zero(4, 1);
    y(2, 0) = std::nan("");
    try {
      ensemble_nll(matrix_t::Zero(4, 1), y, constant_net(vec({0, 0})), DistributionHead::gaussian());
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("sample 2") != std::string::npos);
    }
  }
  CHECK_THROWS_AS(ensemble_nll(matrix_t::Zero(2, 1), matrix_t::Zero(2, 1), constant_net(vec({0, 0, 0})),
                               DistributionHead::gaussian()),
                  InputError);
}

TEST_CASE("soft_target") {
  const matrix_t one = vec({0.2, 0.3, 0.5}).transpose();
  CHECK(soft_target(one) == vector_t(one.row(0).transpose()));
  const matrix_t two = (matrix_t(2, 2) << 1, 0, 0, 1).finished();
  CHECK(soft_target(two) == vec({0.5, 0.5}));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 1);
  matrix_t p(5, 3);
  for (Eigen::Index j = 0; j < 5; ++j) {
    for (Eigen::Index k = 0; k < 3; ++k) p(j, k) = u(rng);
    p.row(j) /= p.row(j).sum();
  }
  vector_t mean = vector_t::Zero(3);
  for (Eigen::Index j = 0; j < 5; ++j)
    for (Eigen::Index k = 0; k < 3; ++k) mean(k) += p(j, k) / 5;
  CHECK(soft_target(p).isApprox(mean, 1e-15));
  CHECK(std::abs(soft_target(p).sum() - 1) < 1e-15);
}

TEST_CASE("categorical_mixture_kl") {
  CHECK(categorical_mixture_kl(vec({0.5, 0.5}), vec({0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(categorical_mixture_kl(vec({1, 0}), vec({0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(categorical_mixture_kl(vec({0.5, 0.5}), vec({1, 0})), NumericalError);
  CHECK_NOTHROW(categorical_mixture_kl(vec({1, 0}), vec({1, 0})));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1);
  for (int t = 0; t < 200; ++t) {
    vector_t a(4), b(4);
    for (Eigen::Index k = 0; k < 4; ++k) {
      a(k) = u(rng);
      b(k) = u(rng);
    }
    a /= a.sum();
    b /= b.sum();
    CHECK(categorical_mixture_kl(a, b) - categorical_entropy(a) >= 0);
    CHECK(std::abs(categorical_mixture_kl(a, a) - categorical_entropy(a)) < 1e-12);
  }
}

TEST_CASE("categorical mixture loss has zero gradient at the soft target") {
  const vector_t soft = vec({0.2, 0.5, 0.3});
  Graph g;
  g.mean(categorical_nll_rows(g, g.parameter("logits"), g.input("soft")));
  ParameterSet p;
  p.add("logits", vec({std::log(0.2 / 0.3), std::log(0.5 / 0.3)}).transpose());
  const Bindings in{{"soft", soft.transpose()}};
  g.forward(in, p);
  CHECK(g.backward(p).at("logits").cwiseAbs().maxCoeff() < 1e-8);
  const ParameterSet fd =
      oracles::finite_difference_gradient([&](const ParameterSet& q) { return g.forward(in, q)(0, 0); }, p);
  CHECK(fd.at("logits").cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("tempered categorical loss") {
  Graph g;
  g.set_output(categorical_nll_rows(g, g.input("logits"), g.input("soft"), 2.5));
  const matrix_t logits = vec({1.0, -2.0}).transpose();
  const matrix_t soft = vec({0.6, 0.1, 0.3}).transpose();
  const vector_t q = tempered_softmax(vec({1.0, -2.0, 0.0}), 2.5);
  const double expected = categorical_mixture_kl(soft.row(0).transpose(), q);
  CHECK(g.forward({{"logits", logits}, {"soft", soft}}, {})(0, 0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("gaussian_mixture_kl_closed") {
  SUBCASE("single member fitted exactly") {
    for (double v : {0.1, 1.0, 3.0}) {
      const GaussianParams<> m{0.4, v};
      CHECK(gaussian_mixture_kl_closed(std::span(&m, 1), m) ==
            doctest::Approx(0.5 * std::log(v) + 0.5).epsilon(1e-15));
    }
  }
  SUBCASE("two symmetric members are fitted by N(0, 2)") {
    const std::vector<GaussianParams<>> ms{{-1, 1}, {1, 1}};
    const double best = gaussian_mixture_kl_closed(ms, {0, 2});
    for (double dm : {-0.1, -0.01, 0.01, 0.1})
      CHECK(gaussian_mixture_kl_closed(ms, {dm, 2}) > best);
    for (double dv : {-0.1, -0.01, 0.01, 0.1})
      CHECK(gaussian_mixture_kl_closed(ms, {0, 2 + dv}) > best);
  }
  SUBCASE("moment matching is the minimiser on random instances") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u(0.1, 2);
    for (int t = 0; t < 50; ++t) {
      std::vector<GaussianParams<>> ms;
      for (int j = 0; j < 5; ++j) ms.push_back({n(rng), u(rng)});
      double mbar = 0, a = 0;
      for (const auto& m : ms) mbar += m.mean / 5;
      for (const auto& m : ms) a += (m.variance + (m.mean - mbar) * (m.mean - mbar)) / 5;
      const double best = gaussian_mixture_kl_closed(ms, {mbar, a});
      // Grid around the optimum.
      for (double dm = -0.2; dm <= 0.2; dm += 0.05)
        for (double f = 0.8; f <= 1.2; f += 0.05)
          CHECK(gaussian_mixture_kl_closed(ms, {mbar + dm, a * f}) >= best - 1e-15);
      // Gradient descent from a distant start lands on the moment match.
      Graph g;
      const NodeId mean = g.parameter("mean");
      const NodeId logv = g.parameter("logv");
      gaussian_mixture_kl_rows(g, mean, g.exp(logv), g.input("mbar"), g.input("a"));
      ParameterSet p;
      p.add("mean", matrix_t::Constant(1, 1, mbar + 3));
      p.add("logv", matrix_t::Constant(1, 1, std::log(a) - 2));
      const Bindings in{{"mbar", matrix_t::Constant(1, 1, mbar)}, {"a", matrix_t::Constant(1, 1, a)}};
      for (int it = 0; it < 5000; ++it) {
        g.forward(in, p);
        const ParameterSet grad = g.backward(p);
        // Newton-like step: the objective is (A + d^2) / (2v) + ln(v) / 2.
        const double v = std::exp(p.at("logv")(0, 0));
        p.at("mean")(0, 0) -= v * grad.at("mean")(0, 0);
        p.at("logv")(0, 0) -= grad.at("logv")(0, 0);
      }
      CHECK(p.at("mean")(0, 0) == doctest::Approx(mbar).epsilon(1e-10));
      CHECK(std::exp(p.at("logv")(0, 0)) == doctest::Approx(a).epsilon(1e-10));
    }
  }
  SUBCASE("graph rows equal the closed form") {
    const std::vector<GaussianParams<>> ms{{0.3, 0.5}, {-0.2, 1.5}, {1.0, 0.2}};
    const DistributionHead head = DistributionHead::gaussian(1e-3);
    // Raw outputs whose evaluation transform gives the members above.
    matrix_t z(3, 2);
    for (Eigen::Index j = 0; j < 3; ++j) {
      z(j, 0) = ms[static_cast<std::size_t>(j)].mean;
      z(j, 1) = std::log(std::expm1(ms[static_cast<std::size_t>(j)].variance - 1e-3));
    }
    const EnsembleOutput e{z, head};
    const MixtureMoments mm = mixture_moments(std::span(&e, 1));
    Graph g;
    gaussian_mixture_kl_rows(g, g.input("m"), g.input("v"), g.input("mbar"), g.input("a"));
    const double value = g.forward({{"m", matrix_t::Constant(1, 1, 0.1)},
                                    {"v", matrix_t::Constant(1, 1, 0.9)},
                                    {"mbar", mm.mean},
                                    {"a", mm.spread}},
                                   {})(0, 0);
    CHECK(value == doctest::Approx(gaussian_mixture_kl_closed(ms, {0.1, 0.9})).epsilon(1e-12));
  }
}

TEST_CASE("mixture KL differences follow the Monte-Carlo cross-entropy") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.2, 2);
  std::vector<GaussianParams<>> ms;
  for (int j = 0; j < 5; ++j) ms.push_back({n(rng), u(rng)});
  const GaussianParams<> base{0.1, 1.0};
  for (int f = 0; f < 5; ++f) {
    const GaussianParams<> fit{n(rng), u(rng)};
    const auto mc = oracles::mc_cross_entropy_difference(ms, fit, base, 200000, 100 + f);
    const double closed = gaussian_mixture_kl_closed(ms, fit) - gaussian_mixture_kl_closed(ms, base);
    CHECK(std::abs(closed - mc.value) < 3 * mc.std_error);
  }
}

TEST_CASE("distribution_distill_nll, Gaussian over z") {
  const DistributionHead head = DistributionHead::gaussian();
  SUBCASE("identical members at mu with unit variance") {
    const EnsembleOutput e{vec({0.3, -0.2}).transpose().replicate(4, 1), head};
    const DiagGaussianOverZ v{vec({0.3, -0.2}), vec({1, 1})};
    CHECK(distribution_distill_nll(std::span(&e, 1), std::span(&v, 1)) == doctest::Approx(kLog2Pi).epsilon(1e-15));
  }
  SUBCASE("random batch against a double loop, and the graph form") {
    std::mt19937_64 rng(6);
    const auto batch = random_batch(5, 7, head, rng);
    std::vector<DiagGaussianOverZ> vs;
    std::uniform_real_distribution<double> u(0.1, 3);
    for (int i = 0; i < 5; ++i) vs.push_back({randn(2, 1, rng), vec({u(rng), u(rng)})});
    double total = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      double acc = 0;
      for (Eigen::Index j = 0; j < 7; ++j)
        for (Eigen::Index d = 0; d < 2; ++d) {
          const double r = batch[i].z(j, d) - vs[i].mu(d);
          acc -= -0.5 * std::log(2 * std::numbers::pi * vs[i].var_diag(d)) - r * r / (2 * vs[i].var_diag(d));
        }
      total += acc / 7;
    }
    CHECK(distribution_distill_nll(batch, vs) == doctest::Approx(total / 5).epsilon(1e-13));

    const ZMoments zm = z_moments(batch);
    matrix_t mu(5, 2), var(5, 2);
    for (Eigen::Index i = 0; i < 5; ++i) {
      mu.row(i) = vs[static_cast<std::size_t>(i)].mu.transpose();
      var.row(i) = vs[static_cast<std::size_t>(i)].var_diag.transpose();
    }
    Graph g;
    g.mean(gaussian_over_z_nll_rows(g, g.input("mu"), g.input("var"), g.input("zm"), g.input("zs")));
    CHECK(g.forward({{"mu", mu}, {"var", var}, {"zm", zm.mean}, {"zs", zm.spread}}, {})(0, 0) ==
          doctest::Approx(total / 5).epsilon(1e-13));
  }
  SUBCASE("maximum-likelihood fit is the sample mean and biased variance") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 20; ++t) {
      const matrix_t z = randn(10, 3, rng, 1.5);
      const EnsembleOutput e{z, DistributionHead::categorical(4)};
      const vector_t mean = z.colwise().mean().transpose();
      const vector_t var = (z.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
      // Optimise (mu, log var) directly by gradient descent on the graph.
      Graph g;
      g.mean(gaussian_over_z_nll_rows(g, g.parameter("mu"), g.exp(g.parameter("logv")), g.input("zm"), g.input("zs")));
      const ZMoments zm = z_moments(std::span(&e, 1));
      const Bindings in{{"zm", zm.mean}, {"zs", zm.spread}};
      ParameterSet p;
      p.add("mu", matrix_t::Zero(1, 3));
      p.add("logv", matrix_t::Zero(1, 3));
      for (int it = 0; it < 2000; ++it) {
        g.forward(in, p);
        const ParameterSet grad = g.backward(p);
        p.at("mu").array() -= p.at("logv").array().exp() * grad.at("mu").array();
        p.at("logv") -= grad.at("logv");
      }
      CHECK((p.at("mu").row(0).transpose() - mean).cwiseAbs().maxCoeff() < 1e-6);
      CHECK((p.at("logv").array().exp().row(0).transpose() - var.array()).abs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("distribution_distill_nll, Dirichlet") {
  std::mt19937_64 rng(8);
  std::vector<matrix_t> targets;
  std::vector<DirichletParams> uniform;
  for (int i = 0; i < 4; ++i) {
    matrix_t p = randn(6, 2, rng).array().exp();
    for (Eigen::Index j = 0; j < 6; ++j) p.row(j) /= p.row(j).sum();
    targets.push_back(p);
    uniform.push_back({vec({1, 1})});
  }
  CHECK(std::abs(distribution_distill_nll(targets, uniform)) < 1e-14);

  std::vector<DirichletParams> vs;
  std::uniform_real_distribution<double> u(0.5, 4);
  for (int i = 0; i < 4; ++i) vs.push_back({vec({u(rng), u(rng)})});
  double total = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    double acc = 0;
    for (Eigen::Index j = 0; j < 6; ++j) acc -= dirichlet_log_pdf(targets[i].row(j).transpose(), vs[i]);
    total += acc / 6;
  }
  CHECK(distribution_distill_nll(targets, vs) == doctest::Approx(total / 4).epsilon(1e-13));

  std::vector<matrix_t> boundary{(matrix_t(1, 2) << 1.0, 0.0).finished()};
  std::vector<DirichletParams> one{{vec({2, 2})}};
  try {
    distribution_distill_nll(boundary, one);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("smoothing") != std::string::npos);
  }
}

TEST_CASE("Dirichlet graph rows match the density") {
  std::mt19937_64 rng(9);
  const DistributionHead head = DistributionHead::categorical(3);
  const auto batch = random_batch(4, 5, head, rng);
  const matrix_t logt = dirichlet_log_targets(batch, 1e-4);
  const matrix_t alpha = randn(4, 3, rng).array().exp() + 0.5;
  Graph g;
  g.set_output(dirichlet_nll_rows(g, g.input("alpha"), g.input("logt")));
  const matrix_t rows = g.forward({{"alpha", alpha}, {"logt", logt}}, {});
  for (std::size_t i = 0; i < 4; ++i) {
    double acc = 0;
    for (Eigen::Index j = 0; j < 5; ++j) {
      const vector_t p = central_smoothing(head.class_probs(batch[i].z.row(j).transpose()), 1e-4);
      acc -= dirichlet_log_pdf(p, {alpha.row(static_cast<Eigen::Index>(i)).transpose()});
    }
    CHECK(rows(static_cast<Eigen::Index>(i), 0) == doctest::Approx(acc / 5).epsilon(1e-12));
  }
}

TEST_CASE("anneal_temperature") {
  const AnnealingSchedule s;
  CHECK(anneal_temperature(0, s) == 10.0);
  CHECK(anneal_temperature(49, s) == 10.0);
  CHECK(anneal_temperature(50, s) == 10.0);
  CHECK(anneal_temperature(60, s) == doctest::Approx(10 * std::pow(0.95, 10)).epsilon(1e-15));
  CHECK(anneal_temperature(95, s) == 1.0);
  CHECK(anneal_temperature(200, s) == 1.0);
  CHECK_THROWS_AS(anneal_temperature(0, AnnealingSchedule{0.5, 50, 0.95, 1.0}), InputError);
  CHECK_THROWS_AS(anneal_temperature(0, AnnealingSchedule{10, 50, 1.5, 1.0}), InputError);
}

TEST_CASE("labelled_pred_loss") {
  const DistributionHead head = DistributionHead::gaussian(1e-3);
  std::mt19937_64 rng(10);
  const matrix_t x = randn(5, 1, rng);
  const matrix_t y = randn(5, 1, rng);
  const Mlp net(MlpSpec{1, {6}, Activation::tanh, 4, 11});
  CHECK(labelled_pred_loss(x, y, net, head, 0.0, 10, 1) == 0.0);
  CHECK(labelled_pred_loss(matrix_t(0, 1), matrix_t(0, 1), net, head, 0.0, 10, 1) == 0.0);
  CHECK_THROWS_AS(labelled_pred_loss(x, y, net, head, -1.0, 10, 1), InputError);

  SUBCASE("degenerate v reduces to the NLL of the mean head") {
    const vector_t mu = vec({0.2, 0.4});
    const Mlp degenerate = constant_net(vec({0.2, 0.4, -1000, -1000}));
    const auto q = head.gaussian_params(mu);
    double expected = 0;
    for (Eigen::Index i = 0; i < 5; ++i) expected -= gaussian_log_pdf(y(i, 0), q) / 5;
    // z draws spread by 1e-9 around mu.
    CHECK(labelled_pred_loss(x, y, degenerate, head, 1.0, 20, 3, 1e-18) == doctest::Approx(expected).epsilon(1e-8));
    CHECK(labelled_pred_loss(x, y, degenerate, head, 2.5, 20, 3, 1e-18) ==
          doctest::Approx(2.5 * expected).epsilon(1e-8));
  }
  SUBCASE("matches the sampled marginal predictive") {
    const matrix_t raw = net.predict(x);
    double expected = 0;
    for (Eigen::Index i = 0; i < 5; ++i) {
      DiagGaussianOverZ v{raw.row(i).head(2).transpose(), vector_t(2)};
      for (Eigen::Index d = 0; d < 2; ++d) v.var_diag(d) = softplus_ref(raw(i, 2 + d)) + 1e-3;
      expected -= marginal_predictive(v, head, 50, 77).log_prob(y(i, 0)) / 5;
    }
    CHECK(labelled_pred_loss(x, y, net, head, 1.0, 50, 77) == doctest::Approx(expected).epsilon(1e-12));

    const DistributionHead cat = DistributionHead::categorical(3);
    const matrix_t labels = (matrix_t(5, 1) << 0, 1, 2, 2, 0).finished();
    double ce = 0;
    for (Eigen::Index i = 0; i < 5; ++i) {
      DiagGaussianOverZ v{raw.row(i).head(2).transpose(), vector_t(2)};
      for (Eigen::Index d = 0; d < 2; ++d) v.var_diag(d) = softplus_ref(raw(i, 2 + d)) + 1e-3;
      ce -= marginal_predictive(v, cat, 40, 5).log_prob(labels(i, 0)) / 5;
    }
    CHECK(labelled_pred_loss(x, labels, net, cat, 1.0, 40, 5) == doctest::Approx(ce).epsilon(1e-12));
  }
}

TEST_CASE("loss builders match finite differences") {
  std::mt19937_64 rng(12);
  const DistributionHead gauss = DistributionHead::gaussian(1e-3);
  const DistributionHead cat = DistributionHead::categorical(3);
  for (int t = 0; t < 5; ++t) {
    const auto gb = random_batch(4, 5, gauss, rng);
    const auto cb = random_batch(4, 5, cat, rng);
    const ZMoments zm = z_moments(gb);
    const MixtureMoments mm = mixture_moments(gb);
    matrix_t labels(4, 1);
    labels << 0, 1, 2, 1;
    const matrix_t eps = sample_standard_normal(1, 8 * 2, static_cast<seed_t>(t));

    std::vector<std::function<NodeId(Graph&, NodeId)>> losses{
        [&](Graph& g, NodeId out) {
          return gaussian_nll_rows(g, g.cols(out, 0, 1), variance_transform(g, g.cols(out, 1, 1), 1e-3), g.constant(randn(4, 1, rng)));
        },
        [&](Graph& g, NodeId out) { return categorical_nll_rows(g, out, g.constant(soft_targets(cb)), 2.5); },
        [&](Graph& g, NodeId out) {
          return gaussian_mixture_kl_rows(g, g.cols(out, 0, 1), variance_transform(g, g.cols(out, 1, 1), 1e-3),
                                          g.constant(mm.mean), g.constant(mm.spread));
        },
        [&](Graph& g, NodeId out) {
          return gaussian_over_z_nll_rows(g, out, variance_transform(g, g.parameter("raw_var"), 1e-3),
                                          g.constant(zm.mean), g.constant(zm.spread));
        },
        [&](Graph& g, NodeId out) {
          const matrix_t logt = dirichlet_log_targets(cb, 1e-4);
          return dirichlet_nll_rows(g, g.exp(g.scale(g.concat_cols({out, g.cols(out, 0, 1)}), 0.5)), g.constant(logt));
        },
        [&](Graph& g, NodeId out) {
          return marginal_nll_rows(g, out, variance_transform(g, g.parameter("raw_var"), 1e-3), g.constant(eps), 8,
                                   g.constant(randn(4, 1, rng)), gauss);
        },
        [&](Graph& g, NodeId out) {
          return marginal_nll_rows(g, out, variance_transform(g, g.parameter("raw_var"), 1e-3), g.constant(eps), 8,
                                   g.constant(one_hot(labels, 3)), cat);
        },
    };
    for (std::size_t k = 0; k < losses.size(); ++k) {
      Graph g;
      g.mean(losses[k](g, g.parameter("out")));
      ParameterSet p;
      p.add("out", randn(4, 2, rng));
      p.add("raw_var", randn(4, 2, rng));
      g.forward({}, p);
      const ParameterSet grad = g.backward(p);
      const ParameterSet fd =
          oracles::finite_difference_gradient([&](const ParameterSet& q) { return g.forward({}, q)(0, 0); }, p);
      CHECK_MESSAGE(oracles::max_relative_error(grad, fd) < 1e-4, "loss " << k);
    }
  }
}

TEST_CASE("targets and losses are invariant to member order") {
  std::mt19937_64 rng(13);
  for (const DistributionHead& head : {DistributionHead::gaussian(), DistributionHead::categorical(3)}) {
    auto batch = random_batch(3, 6, head, rng);
    auto shuffled = batch;
    for (auto& e : shuffled) {
      std::vector<Eigen::Index> idx{5, 2, 0, 4, 1, 3};
      matrix_t z = e.z;
      for (Eigen::Index j = 0; j < 6; ++j) z.row(j) = e.z.row(idx[static_cast<std::size_t>(j)]);
      e.z = z;
    }
    const ZMoments a = z_moments(batch), b = z_moments(shuffled);
    CHECK(a.mean.isApprox(b.mean, 1e-14));
    CHECK(a.spread.isApprox(b.spread, 1e-13));
    if (head.kind == DistributionHead::Kind::gaussian) {
      CHECK(mixture_moments(batch).spread.isApprox(mixture_moments(shuffled).spread, 1e-13));
    } else {
      CHECK(soft_targets(batch).isApprox(soft_targets(shuffled), 1e-14));
      CHECK(dirichlet_log_targets(batch, 1e-4).isApprox(dirichlet_log_targets(shuffled, 1e-4), 1e-14));
    }
  }
}

TEST_CASE("one_hot") {
  const matrix_t labels = (matrix_t(3, 1) << 2, 0, 1).finished();
  const matrix_t oh = one_hot(labels, 3);
  CHECK(oh == (matrix_t(3, 3) << 0, 0, 1, 1, 0, 0, 0, 1, 0).finished());
  CHECK_THROWS_AS(one_hot((matrix_t(1, 1) << 3).finished(), 3), InputError);
  CHECK_THROWS_AS(one_hot((matrix_t(1, 1) << 0.5).finished(), 3), InputError);
  CHECK_THROWS_AS(one_hot((matrix_t(1, 1) << -1).finished(), 3), InputError);
}
