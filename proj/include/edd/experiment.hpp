#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "edd/training.hpp"

namespace edd {

enum class DatasetKind { toy_sine, blobs, csv };

std::string_view to_string(DatasetKind k);
DatasetKind parse_dataset_kind(std::string_view name);

struct DatasetConfig {
  DatasetKind kind = DatasetKind::toy_sine;
  /// toy-sine training set.
  Eigen::Index n = 1000;
  scalar_t x_lo = -3;
  scalar_t x_hi = 3;
  NoiseScale noise = NoiseScale::variance;
  /// Unlabelled distillation pool (toy-sine: uniform inputs; blobs: fresh
  /// cluster draws with labels discarded; csv: the training fold inputs).
  Eigen::Index pool_n = 1000;
  scalar_t pool_lo = -5;
  scalar_t pool_hi = 5;
  /// Held-out evaluation set.
  Eigen::Index eval_n = 500;
  scalar_t eval_lo = -5;
  scalar_t eval_hi = 5;
  /// blobs.
  Eigen::Index n_per_class = 200;
  matrix_t centers = (matrix_t(3, 2) << 0, 2, -1.7320508075688772, -1, 1.7320508075688772, -1).finished();
  scalar_t spread = 1.0;
  /// csv.
  std::filesystem::path path;
  std::string target = "y";
  std::size_t folds = 5;
  std::size_t fold = 0;

  bool classification() const { return kind == DatasetKind::blobs; }
};

struct EvaluateConfig {
  UncertaintyMeasure measure = UncertaintyMeasure::variance;
  Eigen::Index samples = 100;
  Eigen::Index entropy_samples = 1000;
  Eigen::Index sparsification_steps = 100;
  Eigen::Index histogram_bins = 50;
};

/// Every setting of one pipeline run. Section defaults depend on the dataset
/// kind (see `defaults`); a config document overrides individual keys.
struct ExperimentConfig {
  DatasetConfig dataset;
  EnsembleConfig ensemble;
  DistillConfig distill;
  EvaluateConfig evaluate;
  std::filesystem::path output_dir = "out";
  seed_t seed = 0;

  static ExperimentConfig defaults(DatasetKind kind);

  seed_t data_seed() const { return derive_seed(seed, 0); }
  seed_t pool_seed() const { return derive_seed(seed, 1); }
  seed_t eval_seed() const { return derive_seed(seed, 2); }
  seed_t ensemble_seed() const { return derive_seed(seed, 3); }
  seed_t distill_seed() const { return derive_seed(seed, 4); }
  seed_t sampling_seed() const { return derive_seed(seed, 5); }
};

/// JSON document with optional sections dataset, ensemble, distill,
/// evaluate and keys output_dir, seed. Unknown keys and wrongly typed values
/// raise InputError. Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Training, pool and evaluation data of one run.
struct Task {
  std::string dataset_name;
  std::size_t fold = 0;
  std::optional<RegressionSet> train_regression;
  std::optional<RegressionSet> eval_regression;
  std::optional<ClassificationSet> train_classification;
  std::optional<ClassificationSet> eval_classification;
  matrix_t pool;
  std::optional<Standardizer> stats;
};

/// The toy evaluation set is sorted by x.
Task prepare_task(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Stages. Each writes its artifacts under `dir` and is byte-reproducible.

/// member_<j>.model per surviving member and ensemble_log.csv. Throws
/// NumericalError naming the failed members after writing the survivors.
EnsembleResult train_ensemble_stage(const ExperimentConfig& cfg, const Task& task,
                                    const std::filesystem::path& dir);

/// Members from member_*.model files in name order.
std::vector<TrainedModel> load_ensemble(const std::filesystem::path& dir);

/// distilled_<method>.model and distill_<method>_log.csv.
DistillResult distill_stage(const ExperimentConfig& cfg, const Task& task,
                            std::span<const TrainedModel> members, const std::filesystem::path& dir);

struct MetricsRow {
  std::string dataset;
  std::size_t fold = 0;
  std::string model;
  scalar_t rmse = 0;
  scalar_t nll = 0;
  scalar_t ause = 0;
  scalar_t accuracy = 0;
  scalar_t ece = 0;
};

/// Columns dataset, fold, model, rmse, nll, ause (regression) or dataset,
/// fold, model, accuracy, ece (classification).
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows,
                       bool classification);

/// Columns epoch, member, loss, temperature.
void write_log_csv(const std::filesystem::path& path, std::span<const TrainLogRow> log);

/// Evaluates an ensemble directory or a distilled model file on the task's
/// evaluation set.
MetricsRow evaluate_artifact(const ExperimentConfig& cfg, const Task& task,
                             const std::filesystem::path& artifact);

struct ToySummary {
  /// Mean epistemic variance of the gaussian-over-z model on |x| in
  /// [3.5, 5] and on |x| <= 1.
  scalar_t distilled_epistemic_far = 0;
  scalar_t distilled_epistemic_near = 0;
  scalar_t ensemble_epistemic_far = 0;
  scalar_t ensemble_epistemic_near = 0;
  std::vector<MetricsRow> metrics;
};

/// Ensemble, gaussian-over-z distillation and mixture distillation on the
/// toy sinusoid. Writes under cfg.output_dir:
///   ensemble/            member models and training log
///   distilled_*.model, distill_*_log.csv
///   toy_ensemble.csv, toy_gaussian_over_z.csv   x, y, mean, aleatoric, epistemic, total
///   toy_mixture.csv                             x, y, mean, total
///   sparsification_{ensemble,gaussian_over_z,mixture}.csv
///   histogram_mean.csv, histogram_variance.csv  bin_lo, bin_hi, ensemble, distilled
///   metrics.csv
ToySummary run_toy_experiment(const ExperimentConfig& cfg);

/// Ensemble, mixture and gaussian-over-z models on every fold of a csv
/// dataset; writes fold_<k>/ artifacts and one metrics.csv row per
/// (dataset, model, fold).
std::vector<MetricsRow> run_fold_experiment(const ExperimentConfig& cfg);

}  // namespace edd
