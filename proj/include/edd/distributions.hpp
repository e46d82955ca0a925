#pragma once

#include <cmath>
#include <numbers>
#include <string_view>

#include "edd/special.hpp"
#include "edd/types.hpp"

namespace edd {

template <typename Scalar = scalar_t>
struct GaussianParams {
  Scalar mean = 0;
  Scalar variance = 1;

  bool valid() const { return std::isfinite(mean) && std::isfinite(variance) && variance > 0; }
};

/// K-1 free logits; the reference class K-1 (last) is pinned at logit 0.
struct LogitVector {
  vector_t logits;

  Eigen::Index classes() const { return logits.size() + 1; }
};

/// Diagonal normal over a parameter vector z.
struct DiagGaussianOverZ {
  vector_t mu;
  vector_t var_diag;

  Eigen::Index dim() const { return mu.size(); }
  void validate() const;
};

struct DirichletParams {
  vector_t alpha;

  void validate() const;
};

template <typename Scalar>
Scalar gaussian_log_pdf(Scalar y, const GaussianParams<Scalar>& p) {
  const Scalar r = y - p.mean;
  return Scalar(-0.5) * (std::log(Scalar(2) * std::numbers::pi_v<Scalar> * p.variance) +
                         r * r / p.variance);
}

/// Differential entropy 0.5 ln(2 pi e var).
template <typename Scalar>
Scalar gaussian_entropy(Scalar variance) {
  return Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar> * std::numbers::e_v<Scalar> *
                                variance);
}

/// Variance transform used at evaluation: log(1 + e^z) + c, or z + c when
/// z > 10. Training uses the smooth softplus throughout.
template <typename Scalar>
Scalar softplus_variance(Scalar z, Scalar c) {
  if (z > Scalar(10)) return z + c;
  return softplus(z) + c;
}

/// Max-shifted softmax.
vector_t softmax(const vector_t& logits);

/// Softmax of logits / T. Throws InputError for T <= 0.
vector_t tempered_softmax(const vector_t& logits, scalar_t temperature);

/// Appends the reference logit 0 and applies softmax.
vector_t probs_from_logits(const LogitVector& lv);

/// (1 - gamma) p + gamma / K.
vector_t central_smoothing(const vector_t& p, scalar_t gamma);

/// Shannon entropy in nats; 0 log 0 is taken as 0.
scalar_t categorical_entropy(const vector_t& p);

scalar_t diag_normal_log_pdf(const vector_t& z, const DiagGaussianOverZ& d);

/// Log density of Dir(alpha) at p on the open simplex. Throws InputError if
/// any p_k <= 0 (targets must be centrally smoothed first).
scalar_t dirichlet_log_pdf(const vector_t& p, const DirichletParams& d);

/// rows x cols matrix of independent N(0, 1) draws.
matrix_t sample_standard_normal(Eigen::Index rows, Eigen::Index cols, seed_t seed);

/// T x D matrix; row t is mu + sqrt(var) * eps_t with eps from
/// sample_standard_normal(T, D, seed).
matrix_t sample_diag_normal(const DiagGaussianOverZ& d, Eigen::Index samples, seed_t seed);

/// Predictive family q(y; z) and how a raw output row z maps onto it.
///
/// gaussian: z = [mean, raw variance], variance = softplus_variance(z(1), c).
/// categorical: z = K-1 logits with class K-1 as reference.
struct DistributionHead {
  enum class Kind { gaussian, categorical };

  Kind kind = Kind::gaussian;
  Eigen::Index classes = 0;
  scalar_t variance_floor = 1e-3;

  static DistributionHead gaussian(scalar_t variance_floor = 1e-3);
  static DistributionHead categorical(Eigen::Index classes);

  /// Length of z.
  Eigen::Index param_dim() const;
  std::string_view tag() const;
  void validate() const;

  GaussianParams<> gaussian_params(const vector_t& z) const;
  vector_t class_probs(const vector_t& z) const;

  friend bool operator==(const DistributionHead&, const DistributionHead&) = default;
};

}  // namespace edd
