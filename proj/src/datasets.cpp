#include "edd/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace edd {

namespace {

std::string describe(const char* name, seed_t seed, scalar_t lo, scalar_t hi, Eigen::Index n) {
  std::ostringstream os;
  os << name << "(n=" << n << ", lo=" << lo << ", hi=" << hi << ", seed=" << seed << ")";
  return os.str();
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

void RegressionSet::validate() const {
  if (x.rows() != y.size()) throw InputError("regression set: x and y differ in length");
  if (!x.allFinite() || !y.allFinite()) throw InputError("regression set: non-finite values");
}

void ClassificationSet::validate() const {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw InputError("classification set: x and labels differ in length");
  for (Eigen::Index l : labels)
    if (l < 0 || l >= classes) throw InputError("classification set: label out of range");
}

scalar_t toy_noise_variance(scalar_t x, NoiseScale scale) {
  const scalar_t s = 0.15 / (1.0 + std::exp(-x));
  return scale == NoiseScale::variance ? s : s * s;
}

RegressionSet toy_sine(Eigen::Index n, scalar_t x_lo, scalar_t x_hi, seed_t seed, NoiseScale scale) {
  if (n < 1) throw InputError("toy_sine: n must be positive");
  if (!(x_lo < x_hi)) throw InputError("toy_sine: need x_lo < x_hi");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<scalar_t> uniform(x_lo, x_hi);
  std::normal_distribution<scalar_t> normal;
  RegressionSet set;
  set.x.resize(n, 1);
  set.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const scalar_t x = uniform(rng);
    set.x(i, 0) = x;
    set.y(i) = std::sin(x) + std::sqrt(toy_noise_variance(x, scale)) * normal(rng);
  }
  set.provenance = describe("toy_sine", seed, x_lo, x_hi, n) +
                   (scale == NoiseScale::variance ? " noise=variance" : " noise=std");
  return set;
}

matrix_t uniform_pool(Eigen::Index n, scalar_t lo, scalar_t hi, seed_t seed) {
  if (n < 0) throw InputError("uniform_pool: n must be non-negative");
  if (!(lo < hi)) throw InputError("uniform_pool: need lo < hi");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<scalar_t> uniform(lo, hi);
  matrix_t out(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) out(i, 0) = uniform(rng);
  return out;
}

ClassificationSet blobs_classification(Eigen::Index n_per_class, const matrix_t& centers,
                                       scalar_t spread, seed_t seed) {
  if (centers.rows() < 2) throw InputError("blobs: need at least two classes");
  if (n_per_class < 1) throw InputError("blobs: n_per_class must be positive");
  if (!(spread >= 0)) throw InputError("blobs: spread must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<scalar_t> normal;
  ClassificationSet set;
  set.classes = centers.rows();
  set.x.resize(n_per_class * set.classes, centers.cols());
  set.labels.reserve(static_cast<std::size_t>(set.x.rows()));
  Eigen::Index row = 0;
  for (Eigen::Index k = 0; k < set.classes; ++k) {
    for (Eigen::Index i = 0; i < n_per_class; ++i, ++row) {
      for (Eigen::Index d = 0; d < centers.cols(); ++d) set.x(row, d) = centers(k, d) + spread * normal(rng);
      set.labels.push_back(k);
    }
  }
  std::ostringstream os;
  os << "blobs(n_per_class=" << n_per_class << ", K=" << set.classes << ", spread=" << spread
     << ", seed=" << seed << ")";
  set.provenance = os.str();
  return set;
}

std::vector<std::size_t> FoldPlan::train(std::size_t fold) const {
  if (fold >= test.size()) throw InputError("fold index out of range");
  std::vector<bool> held(n, false);
  for (std::size_t i : test[fold]) held[i] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (!held[i]) out.push_back(i);
  return out;
}

FoldPlan make_fold_plan(std::size_t n, std::size_t fold_count, seed_t seed) {
  if (fold_count < 2) throw InputError("fold plan: need at least two folds");
  if (n < fold_count) throw InputError("fold plan: fewer rows than folds");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  FoldPlan plan{n, fold_count, seed, {}};
  plan.test.resize(fold_count);
  for (std::size_t i = 0; i < n; ++i) plan.test[i % fold_count].push_back(idx[i]);
  for (auto& t : plan.test) std::sort(t.begin(), t.end());
  return plan;
}

CsvTable read_csv(std::istream& is, const std::string& source) {
  CsvTable table;
  std::string line;
  if (!std::getline(is, line)) throw InputError(source + ": missing header row");
  for (auto& h : split_row(line)) table.header.push_back(trim(h));
  const auto cols = static_cast<Eigen::Index>(table.header.size());
  if (cols == 0) throw InputError(source + ": empty header");

  std::vector<scalar_t> values;
  Eigen::Index rows = 0;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (static_cast<Eigen::Index>(cells.size()) != cols)
      throw InputError(source + ": row " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " cells, expected " + std::to_string(cols));
    for (Eigen::Index c = 0; c < cols; ++c) {
      const std::string cell = trim(cells[static_cast<std::size_t>(c)]);
      char* end = nullptr;
      const scalar_t v = cell.empty() ? 0.0 : std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
        throw InputError(source + ": row " + std::to_string(line_no) + ", column '" +
                         table.header[static_cast<std::size_t>(c)] + "': missing or non-numeric cell");
      values.push_back(v);
    }
    ++rows;
  }
  table.values = Eigen::Map<Eigen::Matrix<scalar_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path.string());
  return read_csv(is, path.string());
}

Standardizer Standardizer::fit(const matrix_t& x, const vector_t& y) {
  if (x.rows() < 1 || x.rows() != y.size()) throw InputError("standardizer: bad training data");
  Standardizer s;
  s.x_mean = x.colwise().mean().transpose();
  s.x_scale = ((x.rowwise() - s.x_mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  // constant columns map to zero rather than dividing by zero
  for (Eigen::Index c = 0; c < s.x_scale.size(); ++c)
    if (!(s.x_scale(c) > 0)) s.x_scale(c) = 1.0;
  s.y_mean = y.mean();
  s.y_scale = std::sqrt((y.array() - s.y_mean).square().mean());
  if (!(s.y_scale > 0)) s.y_scale = 1.0;
  return s;
}

matrix_t Standardizer::transform_x(const matrix_t& x) const {
  return (x.rowwise() - x_mean.transpose()).array().rowwise() / x_scale.transpose().array();
}

vector_t Standardizer::transform_y(const vector_t& y) const { return (y.array() - y_mean) / y_scale; }

vector_t Standardizer::inverse_y(const vector_t& y) const { return y.array() * y_scale + y_mean; }

std::vector<FoldData> load_csv_regression(const CsvTable& table, const std::string& target_column,
                                          const FoldPlan& plan) {
  const auto it = std::find(table.header.begin(), table.header.end(), target_column);
  if (it == table.header.end()) throw InputError("target column '" + target_column + "' not found");
  const auto target = static_cast<Eigen::Index>(it - table.header.begin());
  const Eigen::Index n = table.values.rows();
  if (static_cast<std::size_t>(n) != plan.n)
    throw InputError("fold plan covers " + std::to_string(plan.n) + " rows but table has " +
                     std::to_string(n));

  matrix_t features(n, table.values.cols() - 1);
  Eigen::Index at = 0;
  for (Eigen::Index c = 0; c < table.values.cols(); ++c)
    if (c != target) features.col(at++) = table.values.col(c);
  const vector_t y = table.values.col(target);
  if (features.cols() == 0) throw InputError("csv has no feature columns");

  auto take = [&](const std::vector<std::size_t>& idx, matrix_t& xs, vector_t& ys) {
    xs.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
    ys.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      xs.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(idx[i]));
      ys(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(idx[i]));
    }
  };

  std::vector<FoldData> folds;
  for (std::size_t f = 0; f < plan.fold_count; ++f) {
    FoldData d;
    d.fold = f;
    matrix_t xtr, xte;
    vector_t ytr, yte;
    take(plan.train(f), xtr, ytr);
    take(plan.test[f], xte, yte);
    d.stats = Standardizer::fit(xtr, ytr);
    d.train = {d.stats.transform_x(xtr), d.stats.transform_y(ytr),
               "csv target=" + target_column + " fold=" + std::to_string(f) + " train"};
    d.test = {d.stats.transform_x(xte), d.stats.transform_y(yte),
              "csv target=" + target_column + " fold=" + std::to_string(f) + " test"};
    folds.push_back(std::move(d));
  }
  return folds;
}

std::vector<FoldData> load_csv_regression(const std::filesystem::path& path,
                                          const std::string& target_column, const FoldPlan& plan) {
  return load_csv_regression(read_csv(path), target_column, plan);
}

void write_regression_csv(std::ostream& os, const RegressionSet& set) {
  if (set.x.cols() == 1) {
    os << "x";
  } else {
    for (Eigen::Index c = 0; c < set.x.cols(); ++c) os << (c ? "," : "") << "x" << c;
  }
  os << ",y\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < set.size(); ++i) {
    for (Eigen::Index c = 0; c < set.x.cols(); ++c) os << set.x(i, c) << ',';
    os << set.y(i) << '\n';
  }
}

}  // namespace edd
