#include "edd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <string>

namespace edd {

namespace {

std::vector<std::size_t> descending_order(std::span<const scalar_t> keys) {
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
  return order;
}

}  // namespace

scalar_t rmse(std::span<const scalar_t> preds, std::span<const scalar_t> targets) {
  if (preds.size() != targets.size()) throw InputError("rmse: length mismatch");
  if (preds.empty()) throw InputError("rmse: empty input");
  scalar_t acc = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) acc += (preds[i] - targets[i]) * (preds[i] - targets[i]);
  return std::sqrt(acc / static_cast<scalar_t>(preds.size()));
}

scalar_t predictive_nll(std::span<const scalar_t> log_densities) {
  if (log_densities.empty()) throw InputError("predictive_nll: empty input");
  scalar_t acc = 0;
  for (scalar_t v : log_densities) acc += v;
  return -acc / static_cast<scalar_t>(log_densities.size());
}

scalar_t accuracy(std::span<const Eigen::Index> predicted, std::span<const Eigen::Index> labels) {
  if (predicted.size() != labels.size()) throw InputError("accuracy: length mismatch");
  if (predicted.empty()) throw InputError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<scalar_t>(hits) / static_cast<scalar_t>(labels.size());
}

SparsificationCurve sparsification_curve(std::span<const scalar_t> errors,
                                         std::span<const std::size_t> removal_order,
                                         Eigen::Index steps, ErrorAggregate aggregate) {
  const std::size_t n = errors.size();
  if (n < 2) throw InputError("sparsification: need at least two points");
  if (steps < 2) throw InputError("sparsification: need at least two steps");
  if (removal_order.size() != n) throw InputError("sparsification: order length mismatch");

  // remaining[k]: sum of squared errors after removing the first k points of
  // the order, accumulated from the back.
  std::vector<scalar_t> remaining(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    const scalar_t e = errors[removal_order[k]];
    remaining[k] = remaining[k + 1] + e * e;
  }
  auto summary = [&](std::size_t removed) {
    const scalar_t mse = remaining[removed] / static_cast<scalar_t>(n - removed);
    return aggregate == ErrorAggregate::rmse ? std::sqrt(mse) : mse;
  };
  const scalar_t full = summary(0);
  if (!(full > 0)) throw InputError("sparsification: all errors are zero, normalisation undefined");

  SparsificationCurve c;
  c.fractions_removed.resize(steps);
  c.normalized_error.resize(steps);
  const scalar_t last = 1.0 - 1.0 / static_cast<scalar_t>(n);
  for (Eigen::Index i = 0; i < steps; ++i) {
    const scalar_t f = last * static_cast<scalar_t>(i) / static_cast<scalar_t>(steps - 1);
    const auto removed = std::min<std::size_t>(
        n - 1, static_cast<std::size_t>(std::ceil(f * static_cast<scalar_t>(n) - 1e-9)));
    c.fractions_removed(i) = f;
    c.normalized_error(i) = summary(removed) / full;
  }
  return c;
}

Sparsification sparsification(std::span<const scalar_t> errors,
                              std::span<const scalar_t> uncertainties, Eigen::Index steps,
                              ErrorAggregate aggregate) {
  if (errors.size() != uncertainties.size()) throw InputError("sparsification: length mismatch");
  Sparsification s;
  s.model = sparsification_curve(errors, descending_order(uncertainties), steps, aggregate);
  s.model.ordering = SparsificationCurve::Ordering::model;
  s.oracle = sparsification_curve(errors, descending_order(errors), steps, aggregate);
  s.oracle.ordering = SparsificationCurve::Ordering::oracle;
  return s;
}

scalar_t ause(const SparsificationCurve& model, const SparsificationCurve& oracle) {
  const Eigen::Index n = model.fractions_removed.size();
  if (n < 2 || oracle.fractions_removed.size() != n || model.normalized_error.size() != n ||
      oracle.normalized_error.size() != n || model.fractions_removed != oracle.fractions_removed)
    throw InputError("ause: curves must share a grid of at least two points");
  const vector_t se = model.normalized_error - oracle.normalized_error;
  scalar_t area = 0;
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    area += 0.5 * (se(i) + se(i + 1)) * (model.fractions_removed(i + 1) - model.fractions_removed(i));
  return area;
}

scalar_t quantile_sorted(std::span<const scalar_t> sorted, scalar_t q) {
  if (sorted.empty()) throw InputError("quantile: empty input");
  const scalar_t pos = q * static_cast<scalar_t>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const scalar_t w = pos - static_cast<scalar_t>(lo);
  return sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

EceResult ece_buckets(std::span<const scalar_t> confidences, std::span<const bool> correct,
                      EceBinning binning, Eigen::Index bins) {
  if (confidences.size() != correct.size()) throw InputError("ece: length mismatch");
  if (confidences.empty()) throw InputError("ece: empty input");
  for (scalar_t c : confidences)
    if (!(c >= 0 && c <= 1)) throw InputError("ece: confidences must lie in [0, 1]");

  std::vector<scalar_t> edges;
  if (binning == EceBinning::quartile) {
    std::vector<scalar_t> sorted(confidences.begin(), confidences.end());
    std::sort(sorted.begin(), sorted.end());
    edges = {0.0, quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.5),
             quantile_sorted(sorted, 0.75), 1.0};
  } else {
    if (bins < 1) throw InputError("ece: need at least one bin");
    for (Eigen::Index b = 0; b <= bins; ++b)
      edges.push_back(static_cast<scalar_t>(b) / static_cast<scalar_t>(bins));
  }

  EceResult r;
  const std::size_t nb = edges.size() - 1;
  r.buckets.resize(nb);
  std::vector<scalar_t> hits(nb, 0.0), conf(nb, 0.0);
  for (std::size_t s = 0; s < nb; ++s) {
    r.buckets[s].lo = edges[s];
    r.buckets[s].hi = edges[s + 1];
  }
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const scalar_t c = confidences[i];
    std::size_t s = 0;
    if (c > 0)
      while (s + 1 < nb && !(c > edges[s] && c <= edges[s + 1])) ++s;
    ++r.buckets[s].count;
    hits[s] += correct[i] ? 1.0 : 0.0;
    conf[s] += c;
  }
  const auto n = static_cast<scalar_t>(confidences.size());
  for (std::size_t s = 0; s < nb; ++s) {
    EceBucket& b = r.buckets[s];
    if (b.count == 0) continue;
    const auto cnt = static_cast<scalar_t>(b.count);
    b.accuracy = hits[s] / cnt;
    b.confidence = conf[s] / cnt;
    r.ece += cnt / n * std::abs(b.accuracy - b.confidence);
  }
  return r;
}

scalar_t ece(std::span<const scalar_t> confidences, std::span<const bool> correct) {
  return ece_buckets(confidences, correct).ece;
}

void write_sparsification_csv(std::ostream& os, const Sparsification& s) {
  os << "fraction,model_err,oracle_err,se\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < s.model.fractions_removed.size(); ++i)
    os << s.model.fractions_removed(i) << ',' << s.model.normalized_error(i) << ','
       << s.oracle.normalized_error(i) << ','
       << s.model.normalized_error(i) - s.oracle.normalized_error(i) << '\n';
}

void write_ece_csv(std::ostream& os, const EceResult& r) {
  os << "bucket_lo,bucket_hi,count,acc,conf\n" << std::setprecision(17);
  for (const EceBucket& b : r.buckets)
    os << b.lo << ',' << b.hi << ',' << b.count << ',' << b.accuracy << ',' << b.confidence << '\n';
}

}  // namespace edd
