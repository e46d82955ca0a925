#pragma once

#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "edd/distributions.hpp"
#include "edd/losses.hpp"

namespace edd {

/// variance and differential_entropy apply to real-valued y, entropy to
/// categorical y.
enum class UncertaintyMeasure { variance, entropy, differential_entropy };

std::string_view to_string(UncertaintyMeasure m);
UncertaintyMeasure parse_measure(std::string_view name);

/// Total, aleatoric and epistemic uncertainty of one prediction.
/// `epistemic` is always exactly `total - aleatoric`; `sample_count` is the
/// number of z draws behind the estimate (0 when exact).
struct UncertaintyReport {
  scalar_t total = 0;
  scalar_t aleatoric = 0;
  scalar_t epistemic = 0;
  UncertaintyMeasure measure = UncertaintyMeasure::variance;
  Eigen::Index sample_count = 0;

  static UncertaintyReport from_parts(scalar_t total, scalar_t aleatoric, UncertaintyMeasure measure,
                                      Eigen::Index sample_count = 0);
};

struct DecomposeOptions {
  /// Monte-Carlo draws for the mixture differential entropy.
  Eigen::Index entropy_samples = 1000;
  seed_t seed = 0;
};

/// Equally weighted mixture of Gaussians.
class GaussianMixture {
 public:
  GaussianMixture() = default;
  explicit GaussianMixture(std::vector<GaussianParams<>> components);

  const std::vector<GaussianParams<>>& components() const { return components_; }
  scalar_t mean() const;
  /// Mean component variance plus the (1/M) variance of component means.
  scalar_t variance() const;
  scalar_t log_pdf(scalar_t y) const;

 private:
  std::vector<GaussianParams<>> components_;
};

/// Decomposition for a set of Gaussian predictive distributions (plug-in
/// posterior over members). variance: closed form via the law of total
/// variance. differential_entropy: exact member entropies plus a stratified
/// Monte-Carlo estimate of the mixture excess (1/M) sum_j KL(p_j || mix).
UncertaintyReport decompose_gaussians(std::span<const GaussianParams<>> members,
                                      UncertaintyMeasure measure, const DecomposeOptions& opts = {});

/// Entropy decomposition for an M x K matrix of member probability vectors.
UncertaintyReport decompose_categoricals(const matrix_t& probs, UncertaintyMeasure measure);

/// Decomposition of an ensemble's raw outputs through its head.
UncertaintyReport ensemble_decompose(const EnsembleOutput& ensemble, UncertaintyMeasure measure,
                                     const DecomposeOptions& opts = {});

/// Sampled marginal predictive q~(y) = (1/T) sum_t q(y; z_t).
struct MarginalPredictive {
  DistributionHead head;
  /// Gaussian head: the T sampled components.
  GaussianMixture mixture;
  /// Categorical head: mean of the sampled class probabilities.
  vector_t class_probs;
  Eigen::Index sample_count = 0;

  scalar_t mean() const;
  scalar_t variance() const;
  /// ln q~(y): density for Gaussian heads, class probability for
  /// categorical heads (y a class index).
  scalar_t log_prob(scalar_t y) const;
};

/// z draws for the distilled model: sample_diag_normal(v, T, seed).
MarginalPredictive marginal_predictive(const DiagGaussianOverZ& v, const DistributionHead& head,
                                       Eigen::Index samples, seed_t seed);

/// Sampled decomposition: the T draws z_t ~ v are treated as an equally
/// weighted ensemble and decomposed with ensemble_decompose.
UncertaintyReport distilled_decompose(const DiagGaussianOverZ& v, const DistributionHead& head,
                                      UncertaintyMeasure measure, Eigen::Index samples, seed_t seed,
                                      const DecomposeOptions& opts = {});

/// Exact entropy decomposition for a Dirichlet over class probabilities:
/// total H(alpha / alpha0), aleatoric E[H(p)] = psi(alpha0 + 1) -
/// sum_k (alpha_k / alpha0) psi(alpha_k + 1).
UncertaintyReport distilled_decompose(const DirichletParams& v, UncertaintyMeasure measure);

/// Per-coordinate sample mean and unbiased (n - 1) variance of the member
/// outputs. Requires M >= 2.
std::pair<vector_t, vector_t> ensemble_logit_moments(const EnsembleOutput& ensemble);

}  // namespace edd
