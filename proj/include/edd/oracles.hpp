#pragma once

// Brute-force reference implementations for tests. Nothing here calls the
// production code path it is meant to check.

#include <functional>
#include <span>
#include <vector>

#include "edd/distributions.hpp"
#include "edd/graph.hpp"

namespace edd::oracles {

struct McEstimate {
  scalar_t value = 0;
  /// Sample standard deviation / sqrt(samples).
  scalar_t std_error = 0;
  Eigen::Index samples = 0;
};

/// -(1/S) sum_s ln q_fit(y_s) with y_s drawn from the equally weighted
/// mixture. Requires samples >= 1000.
McEstimate mc_cross_entropy(std::span<const GaussianParams<>> mixture, const GaussianParams<>& fit,
                            Eigen::Index samples, seed_t seed);

/// Paired estimate of CE(fit_a) - CE(fit_b) on a shared set of draws.
McEstimate mc_cross_entropy_difference(std::span<const GaussianParams<>> mixture,
                                       const GaussianParams<>& fit_a, const GaussianParams<>& fit_b,
                                       Eigen::Index samples, seed_t seed);

/// Composite Simpson integral of `density` over [lo, hi] on `points` nodes
/// (made odd by adding one if needed).
scalar_t quadrature_log_density_check(const std::function<scalar_t(scalar_t)>& density, scalar_t lo,
                                      scalar_t hi, Eigen::Index points);

struct ExhaustiveCurves {
  std::vector<scalar_t> fractions;
  /// One curve per permutation of the points.
  std::vector<std::vector<scalar_t>> curves;
  std::vector<scalar_t> pointwise_min;
  std::vector<scalar_t> pointwise_max;
  /// Removal by descending uncertainty, ties by index.
  std::vector<scalar_t> model;
};

/// Normalized RMSE of the points kept after removing ceil(f N) of them, for
/// every removal ordering and each of `steps` fractions f in [0, 1 - 1/N].
/// Requires N <= 8.
ExhaustiveCurves exhaustive_sparsification(std::span<const scalar_t> errors,
                                           std::span<const scalar_t> uncertainties,
                                           Eigen::Index steps);

/// Central differences of `f` with respect to every parameter entry.
ParameterSet finite_difference_gradient(const std::function<scalar_t(const ParameterSet&)>& f,
                                        const ParameterSet& at, scalar_t h = 1e-5);

/// max |a - b| / max(|a|, |b|, floor) over all entries.
scalar_t max_relative_error(const ParameterSet& a, const ParameterSet& b, scalar_t floor = 1e-3);

}  // namespace edd::oracles
