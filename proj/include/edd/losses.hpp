#pragma once

#include <span>
#include <vector>

#include "edd/distributions.hpp"
#include "edd/graph.hpp"
#include "edd/mlp.hpp"

namespace edd {

/// Raw parameter vectors of all M ensemble members for one input:
/// row j of `z` is z_j = f_j(x).
struct EnsembleOutput {
  matrix_t z;
  DistributionHead head;

  Eigen::Index members() const { return z.rows(); }
  void validate() const;
};

/// Temperature schedule for Dirichlet distillation: T0 for the first
/// `hold_epochs` epochs, then T0 * decay^(epoch - hold_epochs), floored at
/// T_min.
struct AnnealingSchedule {
  scalar_t initial = 10.0;
  std::uint64_t hold_epochs = 50;
  scalar_t decay = 0.95;
  scalar_t minimum = 1.0;

  void validate() const;
};

scalar_t anneal_temperature(std::uint64_t epoch, const AnnealingSchedule& s);

// ---------------------------------------------------------------------------
// Value-level objectives.

/// Mean negative log-likelihood of targets under `model` + `head`, using the
/// smooth training variance transform. Rows of `x` are inputs; `y` is N x 1
/// (real targets, or class indices stored as reals).
scalar_t ensemble_nll(const matrix_t& x, const matrix_t& y, const Mlp& model,
                      const DistributionHead& head);

/// Column-wise mean of an M x K matrix of member probability vectors.
vector_t soft_target(const matrix_t& probs);

/// Cross-entropy H(soft, model) = -sum soft_k ln model_k. This is the
/// mixture KL up to the entropy of `soft`, which does not depend on the
/// model.
scalar_t categorical_mixture_kl(const vector_t& soft, const vector_t& model_probs);

/// Cross-entropy of the fit under the equally weighted Gaussian mixture,
/// less the constant 0.5 ln(2 pi):
///
///   (A + (mean_bar - mu)^2) / (2 var) + 0.5 ln var,
///   A = (1/M) sum_j [var_j + (mean_j - mean_bar)^2].
///
/// Minimised by moment matching: mu = mean_bar, var = A.
scalar_t gaussian_mixture_kl_closed(std::span<const GaussianParams<>> members,
                                    const GaussianParams<>& fit);

/// Mean over inputs of the mean over members of -ln v(z_j).
scalar_t distribution_distill_nll(std::span<const EnsembleOutput> batch,
                                  std::span<const DiagGaussianOverZ> v);

/// Dirichlet variant. `targets[i]` is an M x K matrix of member probability
/// vectors, already centrally smoothed; boundary targets raise InputError.
scalar_t distribution_distill_nll(std::span<const matrix_t> targets,
                                  std::span<const DirichletParams> v);

/// lambda * mean_i -ln q~(y_i; g(x_i)) where q~ is the marginal predictive
/// estimated from `samples` reparameterised draws of z ~ N(mu, var), with
/// the standard-normal draws from sample_standard_normal(samples, D, seed)
/// shared across the batch. `model` outputs [mu, raw variance] (2D
/// columns); variance = softplus(raw) + variance_floor.
scalar_t labelled_pred_loss(const matrix_t& x, const matrix_t& y, const Mlp& model,
                            const DistributionHead& head, scalar_t lambda, Eigen::Index samples,
                            seed_t seed, scalar_t variance_floor = 1e-3);

// ---------------------------------------------------------------------------
// Sufficient statistics of ensemble targets, one row per input.

/// Per-coordinate mean and biased (1/M) variance of z_j.
struct ZMoments {
  matrix_t mean;
  matrix_t spread;
};
ZMoments z_moments(std::span<const EnsembleOutput> batch);

/// Mixture mean and A = mean member variance + biased variance of member
/// means, for Gaussian members (evaluation variance transform).
struct MixtureMoments {
  matrix_t mean;
  matrix_t spread;
};
MixtureMoments mixture_moments(std::span<const EnsembleOutput> batch);

/// Soft targets, N x K.
matrix_t soft_targets(std::span<const EnsembleOutput> batch);

/// Mean over members of ln(smoothed member probabilities), N x K.
matrix_t dirichlet_log_targets(std::span<const EnsembleOutput> batch, scalar_t gamma);

// ---------------------------------------------------------------------------
// Graph builders. Each returns an N x 1 node of per-input losses; callers
// reduce with Graph::mean.

/// softplus(raw) + floor.
NodeId variance_transform(Graph& g, NodeId raw, scalar_t floor);

/// -ln N(y; mean, var); all nodes N x 1.
NodeId gaussian_nll_rows(Graph& g, NodeId mean, NodeId var, NodeId y);

/// -sum onehot * log softmax([logits / T, 0]).
NodeId categorical_nll_rows(Graph& g, NodeId logits, NodeId onehot, scalar_t temperature = 1.0);

/// Closed-form Gaussian mixture objective (see gaussian_mixture_kl_closed).
NodeId gaussian_mixture_kl_rows(Graph& g, NodeId mean, NodeId var, NodeId mixture_mean,
                                NodeId mixture_spread);

/// sum_d [0.5 ln(2 pi var) + (spread + (zbar - mu)^2) / (2 var)], which equals
/// the member-averaged -ln N(z_j; mu, var).
NodeId gaussian_over_z_nll_rows(Graph& g, NodeId mu, NodeId var, NodeId z_mean, NodeId z_spread);

/// -[sum (alpha - 1) * mean_log_targets + lnG(sum alpha) - sum lnG(alpha)].
NodeId dirichlet_nll_rows(Graph& g, NodeId alpha, NodeId mean_log_targets);

/// -ln q~(y) for the sampled marginal predictive. `eps` is a 1 x (T*D) node
/// holding T standard-normal draws; `y` is N x 1 (Gaussian head) or an
/// N x K one-hot (categorical head).
NodeId marginal_nll_rows(Graph& g, NodeId mu, NodeId var, NodeId eps, Eigen::Index samples,
                         NodeId y, const DistributionHead& head);

/// N x K one-hot encoding of class indices stored as reals.
matrix_t one_hot(const matrix_t& labels, Eigen::Index classes);

}  // namespace edd
