#include "edd/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace edd::oracles {

namespace {

scalar_t normal_log_density(scalar_t y, scalar_t mean, scalar_t variance) {
  const scalar_t d = y - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

template <typename PerDraw>
McEstimate mc_mean(std::span<const GaussianParams<>> mixture, Eigen::Index samples, seed_t seed,
                   PerDraw&& per_draw) {
  if (mixture.empty()) throw InputError("mc oracle: empty mixture");
  if (samples < 1000) throw InputError("mc oracle: at least 1000 samples required");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, mixture.size() - 1);
  std::normal_distribution<scalar_t> normal;
  // Welford accumulation.
  scalar_t mean = 0, m2 = 0;
  for (Eigen::Index s = 0; s < samples; ++s) {
    const GaussianParams<>& c = mixture[pick(rng)];
    const scalar_t y = c.mean + std::sqrt(c.variance) * normal(rng);
    const scalar_t v = per_draw(y);
    const scalar_t delta = v - mean;
    mean += delta / static_cast<scalar_t>(s + 1);
    m2 += delta * (v - mean);
  }
  const scalar_t sd = std::sqrt(m2 / static_cast<scalar_t>(samples - 1));
  return {mean, sd / std::sqrt(static_cast<scalar_t>(samples)), samples};
}

}  // namespace

McEstimate mc_cross_entropy(std::span<const GaussianParams<>> mixture, const GaussianParams<>& fit,
                            Eigen::Index samples, seed_t seed) {
  return mc_mean(mixture, samples, seed,
                 [&](scalar_t y) { return -normal_log_density(y, fit.mean, fit.variance); });
}

McEstimate mc_cross_entropy_difference(std::span<const GaussianParams<>> mixture,
                                       const GaussianParams<>& fit_a, const GaussianParams<>& fit_b,
                                       Eigen::Index samples, seed_t seed) {
  return mc_mean(mixture, samples, seed, [&](scalar_t y) {
    return normal_log_density(y, fit_b.mean, fit_b.variance) -
           normal_log_density(y, fit_a.mean, fit_a.variance);
  });
}

scalar_t quadrature_log_density_check(const std::function<scalar_t(scalar_t)>& density, scalar_t lo,
                                      scalar_t hi, Eigen::Index points) {
  if (!(lo < hi)) throw InputError("quadrature: empty interval");
  if (points < 3) throw InputError("quadrature: at least 3 points required");
  if (points % 2 == 0) ++points;
  const Eigen::Index intervals = points - 1;
  const scalar_t h = (hi - lo) / static_cast<scalar_t>(intervals);
  scalar_t acc = 0;
  for (Eigen::Index i = 0; i <= intervals; ++i) {
    const scalar_t x = i == intervals ? hi : lo + h * static_cast<scalar_t>(i);
    const scalar_t f = density(x);
    if (!(f >= 0)) throw InputError("quadrature: density must be non-negative");
    const scalar_t w = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * f;
  }
  return acc * h / 3.0;
}

ExhaustiveCurves exhaustive_sparsification(std::span<const scalar_t> errors,
                                           std::span<const scalar_t> uncertainties,
                                           Eigen::Index steps) {
  const std::size_t n = errors.size();
  if (n < 1 || n > 8) throw InputError("exhaustive sparsification: 1 <= N <= 8 required");
  if (uncertainties.size() != n) throw InputError("exhaustive sparsification: length mismatch");
  if (steps < 2) throw InputError("exhaustive sparsification: at least 2 steps required");

  ExhaustiveCurves out;
  const scalar_t nn = static_cast<scalar_t>(n);
  std::vector<std::size_t> removed_count;
  for (Eigen::Index i = 0; i < steps; ++i) {
    const scalar_t f = static_cast<scalar_t>(i) / static_cast<scalar_t>(steps - 1) * (1.0 - 1.0 / nn);
    out.fractions.push_back(f);
    removed_count.push_back(std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::ceil(f * nn - 1e-9))));
  }
  auto full = [&] {
    scalar_t s = 0;
    for (scalar_t e : errors) s += e * e;
    return std::sqrt(s / nn);
  }();
  if (!(full > 0)) throw InputError("exhaustive sparsification: all errors are zero");

  auto curve_for = [&](const std::vector<std::size_t>& order) {
    std::vector<scalar_t> c;
    for (std::size_t r : removed_count) {
      scalar_t s = 0;
      for (std::size_t k = r; k < n; ++k) s += errors[order[k]] * errors[order[k]];
      c.push_back(std::sqrt(s / static_cast<scalar_t>(n - r)) / full);
    }
    return c;
  };

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    out.curves.push_back(curve_for(perm));
  } while (std::next_permutation(perm.begin(), perm.end()));

  out.pointwise_min = out.curves.front();
  out.pointwise_max = out.curves.front();
  for (const auto& c : out.curves)
    for (std::size_t i = 0; i < c.size(); ++i) {
      out.pointwise_min[i] = std::min(out.pointwise_min[i], c[i]);
      out.pointwise_max[i] = std::max(out.pointwise_max[i], c[i]);
    }

  // Selection by repeated scan for the largest remaining uncertainty.
  std::vector<std::size_t> order;
  std::vector<bool> taken(n, false);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t best = n;
    for (std::size_t k = 0; k < n; ++k)
      if (!taken[k] && (best == n || uncertainties[k] > uncertainties[best])) best = k;
    taken[best] = true;
    order.push_back(best);
  }
  out.model = curve_for(order);
  return out;
}

ParameterSet finite_difference_gradient(const std::function<scalar_t(const ParameterSet&)>& f,
                                        const ParameterSet& at, scalar_t h) {
  ParameterSet probe = at;
  ParameterSet grad = at.zeros_like();
  for (auto& [name, m] : probe) {
    matrix_t& g = grad.at(name);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const scalar_t x0 = m.data()[i];
      m.data()[i] = x0 + h;
      const scalar_t up = f(probe);
      m.data()[i] = x0 - h;
      const scalar_t down = f(probe);
      m.data()[i] = x0;
      g.data()[i] = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

scalar_t max_relative_error(const ParameterSet& a, const ParameterSet& b, scalar_t floor) {
  if (a.size() != b.size()) throw InputError("max_relative_error: parameter sets differ");
  scalar_t worst = 0;
  for (const auto& [name, x] : a) {
    const matrix_t& y = b.at(name);
    if (x.rows() != y.rows() || x.cols() != y.cols())
      throw InputError("max_relative_error: shape mismatch for " + name);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const scalar_t denom = std::max({std::abs(x.data()[i]), std::abs(y.data()[i]), floor});
      worst = std::max(worst, std::abs(x.data()[i] - y.data()[i]) / denom);
    }
  }
  return worst;
}

}  // namespace edd::oracles
