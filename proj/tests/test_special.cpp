#include <doctest.h>

#include <cmath>
#include <random>

#include "edd/special.hpp"

using namespace edd;

TEST_CASE("log_gamma is exact at 1 and 2") {
  CHECK(log_gamma(1.0) == 0.0);
  CHECK(log_gamma(2.0) == 0.0);
}

TEST_CASE("log_gamma at integer and half-integer arguments") {
  // ln((n-1)!) and ln(Gamma(n + 1/2)) = ln((2n)! sqrt(pi) / (4^n n!)).
  double factorial = 1;
  for (int n = 1; n <= 30; ++n) {
    const double expected = std::log(factorial);
    CHECK(log_gamma(static_cast<double>(n)) == doctest::Approx(expected).epsilon(1e-13));
    factorial *= n;
  }
  CHECK(log_gamma(0.5) == doctest::Approx(0.57236494292470008707).epsilon(1e-14));
  CHECK(log_gamma(1.5) == doctest::Approx(-0.12078223763524522234).epsilon(1e-13));
  CHECK(log_gamma(10.5) == doctest::Approx(13.940625219403763633).epsilon(1e-14));
  CHECK(log_gamma(100.5) == doctest::Approx(361.43554046777762156).epsilon(1e-14));
}

TEST_CASE("log_gamma agrees with the C library on random arguments") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-4, 5);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::exp(u(rng));
    const double ref = std::lgamma(x);
    CHECK(std::abs(log_gamma(x) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("digamma") {
  const double euler = 0.57721566490153286061;
  CHECK(digamma(1.0) == doctest::Approx(-euler).epsilon(1e-14));
  CHECK(digamma(0.5) == doctest::Approx(-euler - 2 * std::log(2.0)).epsilon(1e-14));
  CHECK(digamma(10.0) == doctest::Approx(2.2517525890667211076).epsilon(1e-14));
  for (double x : {0.01, 0.3, 1.7, 4.2, 25.0}) {
    CHECK(digamma(x + 1) == doctest::Approx(digamma(x) + 1 / x).epsilon(1e-12));
    const double h = 1e-5 * x;
    const double fd = (std::lgamma(x + h) - std::lgamma(x - h)) / (2 * h);
    CHECK(digamma(x) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("softplus and sigmoid") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(1000.0) == 1000.0);
  CHECK(softplus(-1000.0) >= 0.0);
  CHECK(softplus(-1000.0) < 1e-300);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-1000.0) >= 0.0);
  CHECK(sigmoid(1000.0) == 1.0);
}
