#include "edd/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace edd {

namespace {

scalar_t log_mean_exp(const vector_t& v) {
  const scalar_t mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().mean());
}

}  // namespace

std::string_view to_string(UncertaintyMeasure m) {
  switch (m) {
    case UncertaintyMeasure::variance: return "variance";
    case UncertaintyMeasure::entropy: return "entropy";
    case UncertaintyMeasure::differential_entropy: return "differential-entropy";
  }
  return "variance";
}

UncertaintyMeasure parse_measure(std::string_view name) {
  if (name == "variance") return UncertaintyMeasure::variance;
  if (name == "entropy") return UncertaintyMeasure::entropy;
  if (name == "differential-entropy") return UncertaintyMeasure::differential_entropy;
  throw InputError("unknown uncertainty measure '" + std::string(name) + "'");
}

UncertaintyReport UncertaintyReport::from_parts(scalar_t total, scalar_t aleatoric,
                                                UncertaintyMeasure measure,
                                                Eigen::Index sample_count) {
  return {total, aleatoric, total - aleatoric, measure, sample_count};
}

GaussianMixture::GaussianMixture(std::vector<GaussianParams<>> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw InputError("gaussian mixture: no components");
  for (const auto& c : components_)
    if (!c.valid()) throw InputError("gaussian mixture: invalid component");
}

scalar_t GaussianMixture::mean() const {
  scalar_t m = 0;
  for (const auto& c : components_) m += c.mean;
  return m / static_cast<scalar_t>(components_.size());
}

scalar_t GaussianMixture::variance() const {
  const scalar_t bar = mean();
  scalar_t v = 0;
  for (const auto& c : components_) v += c.variance + (c.mean - bar) * (c.mean - bar);
  return v / static_cast<scalar_t>(components_.size());
}

scalar_t GaussianMixture::log_pdf(scalar_t y) const {
  vector_t lp(static_cast<Eigen::Index>(components_.size()));
  for (std::size_t j = 0; j < components_.size(); ++j)
    lp(static_cast<Eigen::Index>(j)) = gaussian_log_pdf(y, components_[j]);
  return log_mean_exp(lp);
}

UncertaintyReport decompose_gaussians(std::span<const GaussianParams<>> members,
                                      UncertaintyMeasure measure, const DecomposeOptions& opts) {
  if (members.empty()) throw InputError("decompose: no members");
  const auto m = static_cast<scalar_t>(members.size());
  if (measure == UncertaintyMeasure::variance) {
    scalar_t bar = 0, alea = 0;
    for (const auto& p : members) {
      bar += p.mean;
      alea += p.variance;
    }
    bar /= m;
    alea /= m;
    scalar_t spread = 0;
    for (const auto& p : members) spread += (p.mean - bar) * (p.mean - bar);
    return UncertaintyReport::from_parts(alea + spread / m, alea, measure);
  }
  if (measure != UncertaintyMeasure::differential_entropy)
    throw InputError("decompose: measure '" + std::string(to_string(measure)) +
                     "' does not apply to a Gaussian head");
  if (opts.entropy_samples < 1) throw InputError("decompose: entropy_samples must be positive");

  GaussianMixture mix({members.begin(), members.end()});
  scalar_t alea = 0;
  for (const auto& p : members) alea += gaussian_entropy(p.variance);
  alea /= m;

  // Stratified draws: the same number from every member keeps the estimate
  // of (1/M) sum_j E_j[ln p_j - ln mix] unbiased and exactly zero when all
  // members coincide.
  const Eigen::Index per_member =
      std::max<Eigen::Index>(1, (opts.entropy_samples + static_cast<Eigen::Index>(members.size()) - 1) /
                                    static_cast<Eigen::Index>(members.size()));
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<scalar_t> normal;
  scalar_t excess = 0;
  for (const auto& p : members) {
    const scalar_t sd = std::sqrt(p.variance);
    scalar_t acc = 0;
    for (Eigen::Index s = 0; s < per_member; ++s) {
      const scalar_t y = p.mean + sd * normal(rng);
      acc += gaussian_log_pdf(y, p) - mix.log_pdf(y);
    }
    excess += acc / static_cast<scalar_t>(per_member);
  }
  excess /= m;
  return UncertaintyReport::from_parts(alea + excess, alea, measure);
}

UncertaintyReport decompose_categoricals(const matrix_t& probs, UncertaintyMeasure measure) {
  if (measure != UncertaintyMeasure::entropy)
    throw InputError("decompose: measure '" + std::string(to_string(measure)) +
                     "' does not apply to a categorical head");
  if (probs.rows() < 1) throw InputError("decompose: no members");
  const scalar_t h0 = categorical_entropy(probs.row(0).transpose());
  scalar_t offset = 0;
  for (Eigen::Index j = 1; j < probs.rows(); ++j) offset += categorical_entropy(probs.row(j).transpose()) - h0;
  const scalar_t alea = h0 + offset / static_cast<scalar_t>(probs.rows());
  const scalar_t total = categorical_entropy(soft_target(probs));
  return UncertaintyReport::from_parts(total, alea, measure);
}

UncertaintyReport ensemble_decompose(const EnsembleOutput& ensemble, UncertaintyMeasure measure,
                                     const DecomposeOptions& opts) {
  ensemble.validate();
  const DistributionHead& head = ensemble.head;
  if (head.kind == DistributionHead::Kind::gaussian) {
    std::vector<GaussianParams<>> members;
    members.reserve(static_cast<std::size_t>(ensemble.members()));
    for (Eigen::Index j = 0; j < ensemble.members(); ++j)
      members.push_back(head.gaussian_params(ensemble.z.row(j).transpose()));
    return decompose_gaussians(members, measure, opts);
  }
  matrix_t probs(ensemble.members(), head.classes);
  for (Eigen::Index j = 0; j < ensemble.members(); ++j)
    probs.row(j) = head.class_probs(ensemble.z.row(j).transpose()).transpose();
  return decompose_categoricals(probs, measure);
}

scalar_t MarginalPredictive::mean() const {
  if (head.kind != DistributionHead::Kind::gaussian)
    throw InputError("marginal predictive: mean is defined for Gaussian heads only");
  return mixture.mean();
}

scalar_t MarginalPredictive::variance() const {
  if (head.kind != DistributionHead::Kind::gaussian)
    throw InputError("marginal predictive: variance is defined for Gaussian heads only");
  return mixture.variance();
}

scalar_t MarginalPredictive::log_prob(scalar_t y) const {
  if (head.kind == DistributionHead::Kind::gaussian) return mixture.log_pdf(y);
  const auto k = static_cast<Eigen::Index>(y);
  if (static_cast<scalar_t>(k) != y || k < 0 || k >= class_probs.size())
    throw InputError("marginal predictive: label is not a class index");
  return std::log(class_probs(k));
}

MarginalPredictive marginal_predictive(const DiagGaussianOverZ& v, const DistributionHead& head,
                                       Eigen::Index samples, seed_t seed) {
  if (v.dim() != head.param_dim())
    throw InputError("marginal predictive: v dimension does not match head");
  const matrix_t z = sample_diag_normal(v, samples, seed);
  MarginalPredictive out;
  out.head = head;
  out.sample_count = samples;
  if (head.kind == DistributionHead::Kind::gaussian) {
    std::vector<GaussianParams<>> comps;
    comps.reserve(static_cast<std::size_t>(samples));
    for (Eigen::Index t = 0; t < samples; ++t) comps.push_back(head.gaussian_params(z.row(t).transpose()));
    out.mixture = GaussianMixture(std::move(comps));
  } else {
    out.class_probs = vector_t::Zero(head.classes);
    for (Eigen::Index t = 0; t < samples; ++t) out.class_probs += head.class_probs(z.row(t).transpose());
    out.class_probs /= static_cast<scalar_t>(samples);
  }
  return out;
}

UncertaintyReport distilled_decompose(const DiagGaussianOverZ& v, const DistributionHead& head,
                                      UncertaintyMeasure measure, Eigen::Index samples, seed_t seed,
                                      const DecomposeOptions& opts) {
  if (v.dim() != head.param_dim())
    throw InputError("distilled decompose: v dimension does not match head");
  const EnsembleOutput drawn{sample_diag_normal(v, samples, seed), head};
  UncertaintyReport r = ensemble_decompose(drawn, measure, opts);
  r.sample_count = samples;
  return r;
}

UncertaintyReport distilled_decompose(const DirichletParams& v, UncertaintyMeasure measure) {
  v.validate();
  if (measure != UncertaintyMeasure::entropy)
    throw InputError("distilled decompose: Dirichlet heads support the entropy measure only");
  const scalar_t a0 = v.alpha.sum();
  scalar_t alea = digamma(a0 + 1.0);
  for (Eigen::Index k = 0; k < v.alpha.size(); ++k)
    alea -= v.alpha(k) / a0 * digamma(v.alpha(k) + 1.0);
  return UncertaintyReport::from_parts(categorical_entropy(v.alpha / a0), alea, measure);
}

std::pair<vector_t, vector_t> ensemble_logit_moments(const EnsembleOutput& ensemble) {
  ensemble.validate();
  if (ensemble.members() < 2) throw InputError("ensemble_logit_moments: need at least two members");
  const vector_t mean = ensemble.z.colwise().mean().transpose();
  const matrix_t centered = ensemble.z.rowwise() - mean.transpose();
  const vector_t var =
      centered.array().square().colwise().sum().transpose() / static_cast<scalar_t>(ensemble.members() - 1);
  return {mean, var};
}

}  // namespace edd
