#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "edd/types.hpp"

namespace edd {

/// Inputs (one row per sample) and real targets.
struct RegressionSet {
  matrix_t x;
  vector_t y;
  std::string provenance;

  Eigen::Index size() const { return x.rows(); }
  void validate() const;
};

struct ClassificationSet {
  matrix_t x;
  std::vector<Eigen::Index> labels;
  Eigen::Index classes = 0;
  std::string provenance;

  Eigen::Index size() const { return x.rows(); }
  void validate() const;
};

/// How the toy-noise scale 0.15 / (1 + e^-x) is read.
enum class NoiseScale { variance, standard_deviation };

scalar_t toy_noise_variance(scalar_t x, NoiseScale scale = NoiseScale::variance);

/// y = sin(x) + eps, eps ~ N(0, 0.15 / (1 + e^-x)), x ~ U[x_lo, x_hi].
RegressionSet toy_sine(Eigen::Index n, scalar_t x_lo, scalar_t x_hi, seed_t seed,
                       NoiseScale scale = NoiseScale::variance);

/// n x 1 matrix of U[lo, hi] draws.
matrix_t uniform_pool(Eigen::Index n, scalar_t lo, scalar_t hi, seed_t seed);

/// `n_per_class` isotropic Gaussian draws around each row of `centers`
/// (K x d), labelled by row index.
ClassificationSet blobs_classification(Eigen::Index n_per_class, const matrix_t& centers,
                                       scalar_t spread, seed_t seed);

/// Shuffled partition of 0..n-1 into `fold_count` test sets whose sizes
/// differ by at most one.
struct FoldPlan {
  std::size_t n = 0;
  std::size_t fold_count = 5;
  seed_t seed = 0;
  std::vector<std::vector<std::size_t>> test;

  /// Complement of test[fold], ascending.
  std::vector<std::size_t> train(std::size_t fold) const;
};

FoldPlan make_fold_plan(std::size_t n, std::size_t fold_count, seed_t seed);

struct CsvTable {
  std::vector<std::string> header;
  matrix_t values;
};

/// Comma-separated, header row required, every cell numeric.
CsvTable read_csv(std::istream& is, const std::string& source = "<stream>");
CsvTable read_csv(const std::filesystem::path& path);

/// Per-column affine maps fitted on training data only.
struct Standardizer {
  vector_t x_mean;
  vector_t x_scale;
  scalar_t y_mean = 0;
  scalar_t y_scale = 1;

  static Standardizer fit(const matrix_t& x, const vector_t& y);
  matrix_t transform_x(const matrix_t& x) const;
  vector_t transform_y(const vector_t& y) const;
  vector_t inverse_y(const vector_t& y) const;
};

struct FoldData {
  std::size_t fold = 0;
  RegressionSet train;
  RegressionSet test;
  Standardizer stats;
};

/// Splits the table per `plan`, standardising features and target with
/// statistics from each training fold.
std::vector<FoldData> load_csv_regression(const CsvTable& table, const std::string& target_column,
                                          const FoldPlan& plan);
std::vector<FoldData> load_csv_regression(const std::filesystem::path& path,
                                          const std::string& target_column, const FoldPlan& plan);

/// Header x (or x0, x1, ...) then y.
void write_regression_csv(std::ostream& os, const RegressionSet& set);

}  // namespace edd
