#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace edd {

/// Natural log of the gamma function for x > 0 (Lanczos, g = 7, 9 terms).
template <typename Scalar>
Scalar log_gamma(Scalar x) {
  static constexpr std::array<double, 9> kCoeff = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (!(x > Scalar(0))) return std::numeric_limits<Scalar>::quiet_NaN();
  if (x < Scalar(0.5)) {
    // reflection: Γ(x)Γ(1-x) = π / sin(πx)
    const Scalar pi = std::numbers::pi_v<Scalar>;
    return std::log(pi / std::sin(pi * x)) - log_gamma(Scalar(1) - x);
  }
  // ln Γ(1) = ln Γ(2) = 0 exactly; the series loses relative accuracy there.
  if (x == Scalar(1) || x == Scalar(2)) return Scalar(0);
  // Shift small arguments upward so the series is evaluated where it is
  // most accurate: ln Γ(x) = ln Γ(x + n) - ln(x (x+1) ... (x+n-1)).
  Scalar shift_log = 0;
  while (x < Scalar(7)) {
    shift_log += std::log(x);
    x += Scalar(1);
  }
  const Scalar xm1 = x - Scalar(1);
  Scalar acc = Scalar(kCoeff[0]);
  for (std::size_t i = 1; i < kCoeff.size(); ++i) acc += Scalar(kCoeff[i]) / (xm1 + Scalar(i));
  const Scalar t = xm1 + Scalar(7.5);
  const Scalar half_log_two_pi = Scalar(0.91893853320467274178);
  return half_log_two_pi + (xm1 + Scalar(0.5)) * std::log(t) - t + std::log(acc) - shift_log;
}

/// Digamma ψ(x) = d/dx ln Γ(x) for x > 0: upward recurrence then the
/// asymptotic expansion.
template <typename Scalar>
Scalar digamma(Scalar x) {
  if (!(x > Scalar(0))) return std::numeric_limits<Scalar>::quiet_NaN();
  Scalar result = 0;
  while (x < Scalar(12)) {
    result -= Scalar(1) / x;
    x += Scalar(1);
  }
  const Scalar inv = Scalar(1) / x;
  const Scalar inv2 = inv * inv;
  // B2k / (2k) terms
  const Scalar series =
      inv2 * (Scalar(1) / 12 -
              inv2 * (Scalar(1) / 120 -
                      inv2 * (Scalar(1) / 252 -
                              inv2 * (Scalar(1) / 240 -
                                      inv2 * (Scalar(1) / 132 -
                                              inv2 * (Scalar(691) / 32760 -
                                                      inv2 * (Scalar(1) / 12)))))));
  return result + std::log(x) - Scalar(0.5) * inv - series;
}

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) {
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

}  // namespace edd
