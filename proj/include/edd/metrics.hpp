#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "edd/types.hpp"

namespace edd {

scalar_t rmse(std::span<const scalar_t> preds, std::span<const scalar_t> targets);

/// Negative mean of per-point predictive log-densities.
scalar_t predictive_nll(std::span<const scalar_t> log_densities);

scalar_t accuracy(std::span<const Eigen::Index> predicted, std::span<const Eigen::Index> labels);

/// How the remaining points' errors are summarised at each sparsification
/// step.
enum class ErrorAggregate { rmse, mse };

struct SparsificationCurve {
  enum class Ordering { model, oracle };

  vector_t fractions_removed;
  /// Aggregate error of the remaining points divided by the full-set value.
  vector_t normalized_error;
  Ordering ordering = Ordering::model;
};

struct Sparsification {
  SparsificationCurve model;
  SparsificationCurve oracle;
};

/// Sparsification curves for per-point absolute errors. At each of `steps`
/// uniformly spaced fractions f in [0, 1 - 1/N] the ceil(f N) points with the
/// largest uncertainty (model) or largest error (oracle) are removed. Ties
/// keep the original index order.
Sparsification sparsification(std::span<const scalar_t> errors,
                              std::span<const scalar_t> uncertainties, Eigen::Index steps = 100,
                              ErrorAggregate aggregate = ErrorAggregate::rmse);

/// Curve obtained by removing points in the given order (most uncertain
/// first).
SparsificationCurve sparsification_curve(std::span<const scalar_t> errors,
                                         std::span<const std::size_t> removal_order,
                                         Eigen::Index steps,
                                         ErrorAggregate aggregate = ErrorAggregate::rmse);

/// Trapezoidal area under model - oracle.
scalar_t ause(const SparsificationCurve& model, const SparsificationCurve& oracle);

enum class EceBinning { quartile, fixed_width };

struct EceBucket {
  scalar_t lo = 0;
  scalar_t hi = 0;
  Eigen::Index count = 0;
  scalar_t accuracy = 0;
  scalar_t confidence = 0;
};

struct EceResult {
  std::vector<EceBucket> buckets;
  scalar_t ece = 0;
};

/// Buckets (rho_s, rho_s+1] with rho = {0, q25, q50, q75, 1} of the
/// confidences (linear interpolation); a confidence of exactly 0 goes in
/// the first bucket. `fixed_width` uses `bins` equal-width buckets instead.
EceResult ece_buckets(std::span<const scalar_t> confidences, std::span<const bool> correct,
                      EceBinning binning = EceBinning::quartile, Eigen::Index bins = 10);

scalar_t ece(std::span<const scalar_t> confidences, std::span<const bool> correct);

/// Linear-interpolation quantile of sorted data, position q (N - 1).
scalar_t quantile_sorted(std::span<const scalar_t> sorted, scalar_t q);

/// CSV columns: fraction, model_err, oracle_err, se.
void write_sparsification_csv(std::ostream& os, const Sparsification& s);
/// CSV columns: bucket_lo, bucket_hi, count, acc, conf.
void write_ece_csv(std::ostream& os, const EceResult& r);

}  // namespace edd
