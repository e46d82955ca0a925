#include "edd/distributions.hpp"

#include <random>
#include <string>

namespace edd {

void DiagGaussianOverZ::validate() const {
  if (mu.size() != var_diag.size()) throw InputError("diag normal: mu and var_diag differ in length");
  if (!mu.allFinite()) throw InputError("diag normal: non-finite mean");
  for (Eigen::Index i = 0; i < var_diag.size(); ++i)
    if (!(var_diag(i) > 0) || !std::isfinite(var_diag(i)))
      throw InputError("diag normal: variances must be positive and finite");
}

void DirichletParams::validate() const {
  if (alpha.size() < 2) throw InputError("dirichlet: need at least two concentrations");
  for (Eigen::Index i = 0; i < alpha.size(); ++i)
    if (!(alpha(i) > 0) || !std::isfinite(alpha(i)))
      throw InputError("dirichlet: concentrations must be positive and finite");
}

vector_t softmax(const vector_t& logits) {
  const vector_t e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

vector_t tempered_softmax(const vector_t& logits, scalar_t temperature) {
  if (!(temperature > 0)) throw InputError("tempered_softmax: temperature must be positive");
  return softmax(logits / temperature);
}

vector_t probs_from_logits(const LogitVector& lv) {
  vector_t full(lv.classes());
  full.head(lv.logits.size()) = lv.logits;
  full(full.size() - 1) = 0.0;
  return softmax(full);
}

vector_t central_smoothing(const vector_t& p, scalar_t gamma) {
  if (!(gamma >= 0 && gamma < 1)) throw InputError("central_smoothing: gamma must lie in [0, 1)");
  return (1.0 - gamma) * p.array() + gamma / static_cast<scalar_t>(p.size());
}

scalar_t categorical_entropy(const vector_t& p) {
  scalar_t h = 0;
  for (Eigen::Index k = 0; k < p.size(); ++k)
    if (p(k) > 0) h -= p(k) * std::log(p(k));
  return h;
}

scalar_t diag_normal_log_pdf(const vector_t& z, const DiagGaussianOverZ& d) {
  if (z.size() != d.dim()) throw InputError("diag normal: dimension mismatch");
  scalar_t total = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    total += gaussian_log_pdf(z(i), GaussianParams<>{d.mu(i), d.var_diag(i)});
  return total;
}

scalar_t dirichlet_log_pdf(const vector_t& p, const DirichletParams& d) {
  d.validate();
  if (p.size() != d.alpha.size()) throw InputError("dirichlet: dimension mismatch");
  for (Eigen::Index k = 0; k < p.size(); ++k)
    if (!(p(k) > 0))
      throw InputError("dirichlet: target on the simplex boundary (component " + std::to_string(k) +
                       " = " + std::to_string(p(k)) + "); apply central smoothing first");
  scalar_t out = log_gamma(d.alpha.sum());
  for (Eigen::Index k = 0; k < p.size(); ++k)
    out += (d.alpha(k) - 1.0) * std::log(p(k)) - log_gamma(d.alpha(k));
  return out;
}

matrix_t sample_standard_normal(Eigen::Index rows, Eigen::Index cols, seed_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<scalar_t> dist;
  matrix_t out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = dist(rng);
  return out;
}

matrix_t sample_diag_normal(const DiagGaussianOverZ& d, Eigen::Index samples, seed_t seed) {
  if (samples < 1) throw InputError("sample_diag_normal: need at least one sample");
  d.validate();
  matrix_t eps = sample_standard_normal(samples, d.dim(), seed);
  const Eigen::RowVectorXd sd = d.var_diag.array().sqrt().transpose();
  eps.array().rowwise() *= sd.array();
  eps.rowwise() += d.mu.transpose();
  return eps;
}

DistributionHead DistributionHead::gaussian(scalar_t variance_floor) {
  DistributionHead h;
  h.kind = Kind::gaussian;
  h.variance_floor = variance_floor;
  h.validate();
  return h;
}

DistributionHead DistributionHead::categorical(Eigen::Index classes) {
  DistributionHead h;
  h.kind = Kind::categorical;
  h.classes = classes;
  h.validate();
  return h;
}

Eigen::Index DistributionHead::param_dim() const {
  return kind == Kind::gaussian ? 2 : classes - 1;
}

std::string_view DistributionHead::tag() const {
  return kind == Kind::gaussian ? "gaussian" : "categorical";
}

void DistributionHead::validate() const {
  if (kind == Kind::gaussian && !(variance_floor > 0))
    throw InputError("gaussian head: variance floor must be positive");
  if (kind == Kind::categorical && classes < 2)
    throw InputError("categorical head: need at least two classes");
}

GaussianParams<> DistributionHead::gaussian_params(const vector_t& z) const {
  if (kind != Kind::gaussian) throw InputError("head is not gaussian");
  if (z.size() != 2) throw InputError("gaussian head expects 2 raw outputs");
  return {z(0), softplus_variance(z(1), variance_floor)};
}

vector_t DistributionHead::class_probs(const vector_t& z) const {
  if (kind != Kind::categorical) throw InputError("head is not categorical");
  if (z.size() != classes - 1) throw InputError("categorical head expects K-1 logits");
  return probs_from_logits(LogitVector{z});
}

}  // namespace edd
