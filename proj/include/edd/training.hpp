#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "edd/datasets.hpp"
#include "edd/losses.hpp"
#include "edd/metrics.hpp"
#include "edd/model_io.hpp"
#include "edd/uncertainty.hpp"

namespace edd {

/// One row of a training log. `member` is 0 for distilled models;
/// `temperature` is 1 unless annealing is active.
struct TrainLogRow {
  std::uint64_t epoch = 0;
  std::size_t member = 0;
  scalar_t loss = 0;
  scalar_t temperature = 1;
  scalar_t lr = 0;
};

/// A network together with the predictive head its outputs parameterise.
struct TrainedModel {
  Mlp network{MlpSpec{}};
  DistributionHead head;

  ModelRecord to_record() const;
  static TrainedModel from_record(const ModelRecord& record);

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

struct EnsembleConfig {
  std::size_t members = 10;
  /// input_dim and output_dim are filled in from the data and head.
  MlpSpec member_spec{1, {10}, Activation::tanh, 2, 0};
  std::uint64_t epochs = 150;
  Eigen::Index batch_size = 32;
  scalar_t lr = 1e-3;
  seed_t base_seed = 0;
  scalar_t variance_floor = 1e-3;
  /// Worker threads for member training; 0 or 1 trains serially.
  std::size_t threads = 1;

  void validate() const;
};

struct MemberFailure {
  std::size_t member = 0;
  std::uint64_t epoch = 0;
  std::string message;
};

struct EnsembleResult {
  /// Successfully trained members in member order.
  std::vector<TrainedModel> members;
  std::vector<std::size_t> member_indices;
  std::vector<TrainLogRow> log;
  std::vector<MemberFailure> failures;
};

/// Trains `cfg.members` networks independently under the head's NLL. Member
/// j uses seed base_seed + j for initialisation and for its batch order. A
/// member whose loss or gradient becomes non-finite is dropped and listed in
/// `failures`.
EnsembleResult train_ensemble(const RegressionSet& data, const EnsembleConfig& cfg);
EnsembleResult train_ensemble(const ClassificationSet& data, const EnsembleConfig& cfg);

/// Raw member outputs for every pool row. Labels are never consulted.
std::vector<EnsembleOutput> collect_ensemble_outputs(std::span<const TrainedModel> members,
                                                     const matrix_t& pool);

enum class DistillMethod { mixture, gaussian_over_z, dirichlet };

std::string_view to_string(DistillMethod m);
DistillMethod parse_distill_method(std::string_view name);

struct DistillConfig {
  DistillMethod method = DistillMethod::gaussian_over_z;
  /// input_dim and output_dim are filled in from the pool and method.
  MlpSpec distilled_spec{1, {10, 10}, Activation::tanh, 4, 0};
  std::uint64_t epochs = 30;
  Eigen::Index batch_size = 32;
  scalar_t lr0 = 1e-3;
  /// Exponent of the step-decay schedule lr0 * k^-c.
  scalar_t lr_decay = 0.8;
  std::uint64_t lr_stride = 20;
  /// Variance floor for the Gaussian over z.
  scalar_t variance_floor = 1e-3;
  /// Weight of the labelled marginal-likelihood term (gaussian_over_z only).
  scalar_t lambda = 0.0;
  Eigen::Index pred_samples = 100;
  AnnealingSchedule annealing;
  scalar_t smoothing = 1e-4;
  /// Softmax temperature on the distilled logits for categorical mixture
  /// distillation.
  scalar_t mixture_temperature = 2.5;
  seed_t seed = 0;

  void validate() const;
};

/// Single distilled network.
///
/// mixture: outputs parameterise the base head directly.
/// gaussian_over_z: outputs [mu (D), raw variance (D)] of a diagonal normal
///   over the base head's z.
/// dirichlet: outputs K raw concentrations, alpha = exp(out / T).
struct DistilledModel {
  Mlp network{MlpSpec{}};
  DistillMethod method = DistillMethod::gaussian_over_z;
  DistributionHead base_head;
  scalar_t variance_floor = 1e-3;

  /// Output width required by `method` on `base_head`.
  static Eigen::Index output_dim(DistillMethod method, const DistributionHead& base_head);

  /// Raw network outputs, one row per input.
  matrix_t raw(const matrix_t& x) const;
  /// gaussian_over_z: v for one raw output row (evaluation transform).
  DiagGaussianOverZ z_distribution(const vector_t& raw_row) const;
  /// dirichlet: alpha = exp(raw) at temperature 1.
  DirichletParams dirichlet(const vector_t& raw_row) const;

  ModelRecord to_record() const;
  static DistilledModel from_record(const ModelRecord& record);

  friend bool operator==(const DistilledModel&, const DistilledModel&) = default;
};

/// Labelled data for the optional marginal-likelihood term.
struct LabelledData {
  matrix_t x;
  /// N x 1: real targets or class indices.
  matrix_t y;
};

struct DistillResult {
  DistilledModel model;
  std::vector<TrainLogRow> log;
};

/// Trains a distilled model on `outputs` (one per row of `pool`). Only the
/// ensemble outputs are targets; `labelled` is read only when lambda > 0.
DistillResult distill(std::span<const EnsembleOutput> outputs, const matrix_t& pool,
                      const DistillConfig& cfg,
                      const std::optional<LabelledData>& labelled = std::nullopt);

// ---------------------------------------------------------------------------
// Evaluation.

struct EvalOptions {
  UncertaintyMeasure measure = UncertaintyMeasure::variance;
  /// z draws for distilled models.
  Eigen::Index samples = 100;
  Eigen::Index entropy_samples = 1000;
  Eigen::Index sparsification_steps = 100;
  seed_t seed = 0;
  /// Maps standardised targets back to original units when set.
  std::optional<Standardizer> destandardize;
};

struct PointPrediction {
  scalar_t mean = 0;
  /// Predictive variance (regression) or entropy (classification) of the
  /// full predictive distribution.
  scalar_t total = 0;
  /// Absent for mixture-distilled models, which carry no decomposition.
  std::optional<UncertaintyReport> report;
  /// ln q(y) of the observed target.
  scalar_t log_density = 0;
  /// Classification only.
  Eigen::Index predicted_class = -1;
  scalar_t confidence = 0;
};

struct RegressionEvaluation {
  std::vector<PointPrediction> points;
  scalar_t rmse = 0;
  scalar_t nll = 0;
  scalar_t ause = 0;
  Sparsification curves;
};

struct ClassificationEvaluation {
  std::vector<PointPrediction> points;
  scalar_t accuracy = 0;
  scalar_t ece = 0;
  scalar_t nll = 0;
  EceResult buckets;
};

RegressionEvaluation evaluate(std::span<const TrainedModel> ensemble, const RegressionSet& data,
                              const EvalOptions& opts = {});
RegressionEvaluation evaluate(const DistilledModel& model, const RegressionSet& data,
                              const EvalOptions& opts = {});
ClassificationEvaluation evaluate(std::span<const TrainedModel> ensemble,
                                  const ClassificationSet& data, const EvalOptions& opts = {});
ClassificationEvaluation evaluate(const DistilledModel& model, const ClassificationSet& data,
                                  const EvalOptions& opts = {});

}  // namespace edd
