#include "edd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace edd {

namespace {

const scalar_t kHalfLogTwoPi = 0.5 * std::log(2.0 * std::numbers::pi);

void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw InputError(std::string(what) + ": empty batch");
}

// Mean of a per-row loss column; a non-finite row is reported by index.
scalar_t checked_mean(const matrix_t& rows, const char* what) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    if (!std::isfinite(rows(i, 0)))
      throw NumericalError(std::string(what) + ": non-finite loss at sample " + std::to_string(i));
  return rows.mean();
}

}  // namespace

void EnsembleOutput::validate() const {
  if (z.rows() < 1) throw InputError("ensemble output: need at least one member");
  if (z.cols() != head.param_dim())
    throw InputError("ensemble output: " + std::to_string(z.cols()) + " columns but head '" +
                     std::string(head.tag()) + "' expects " + std::to_string(head.param_dim()));
  if (!z.allFinite()) throw NumericalError("ensemble output: non-finite member output");
}

void AnnealingSchedule::validate() const {
  if (!(minimum > 0)) throw InputError("annealing: minimum temperature must be positive");
  if (!(initial >= minimum)) throw InputError("annealing: initial temperature below minimum");
  if (!(decay > 0 && decay <= 1)) throw InputError("annealing: decay must lie in (0, 1]");
}

scalar_t anneal_temperature(std::uint64_t epoch, const AnnealingSchedule& s) {
  s.validate();
  if (epoch < s.hold_epochs) return s.initial;
  const auto steps = static_cast<scalar_t>(epoch - s.hold_epochs);
  return std::max(s.minimum, s.initial * std::pow(s.decay, steps));
}

matrix_t one_hot(const matrix_t& labels, Eigen::Index classes) {
  matrix_t out = matrix_t::Zero(labels.rows(), classes);
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    const scalar_t v = labels(i, 0);
    const auto k = static_cast<Eigen::Index>(v);
    if (static_cast<scalar_t>(k) != v || k < 0 || k >= classes)
      throw InputError("label at row " + std::to_string(i) + " is not a class index in [0, " +
                       std::to_string(classes) + ")");
    out(i, k) = 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph builders.

NodeId variance_transform(Graph& g, NodeId raw, scalar_t floor) {
  return g.shift(g.softplus(raw), floor);
}

NodeId gaussian_nll_rows(Graph& g, NodeId mean, NodeId var, NodeId y) {
  const NodeId log_term = g.shift(g.scale(g.log(var), 0.5), kHalfLogTwoPi);
  const NodeId quad = g.scale(g.div(g.square(g.sub(y, mean)), var), 0.5);
  return g.add(log_term, quad);
}

NodeId categorical_nll_rows(Graph& g, NodeId logits, NodeId onehot, scalar_t temperature) {
  if (!(temperature > 0)) throw InputError("categorical loss: temperature must be positive");
  const NodeId scaled = temperature == 1.0 ? logits : g.scale(logits, 1.0 / temperature);
  const NodeId log_probs = g.log_softmax_rows(g.append_zero_col(scaled));
  return g.scale(g.row_sum(g.mul(onehot, log_probs)), -1.0);
}

NodeId gaussian_mixture_kl_rows(Graph& g, NodeId mean, NodeId var, NodeId mixture_mean,
                                NodeId mixture_spread) {
  const NodeId total = g.add(mixture_spread, g.square(g.sub(mixture_mean, mean)));
  return g.add(g.scale(g.div(total, var), 0.5), g.scale(g.log(var), 0.5));
}

NodeId gaussian_over_z_nll_rows(Graph& g, NodeId mu, NodeId var, NodeId z_mean, NodeId z_spread) {
  const NodeId log_term = g.shift(g.scale(g.log(var), 0.5), kHalfLogTwoPi);
  const NodeId total = g.add(z_spread, g.square(g.sub(z_mean, mu)));
  return g.row_sum(g.add(log_term, g.scale(g.div(total, var), 0.5)));
}

NodeId dirichlet_nll_rows(Graph& g, NodeId alpha, NodeId mean_log_targets) {
  const NodeId cross = g.row_sum(g.mul(g.shift(alpha, -1.0), mean_log_targets));
  const NodeId log_norm = g.lgamma(g.row_sum(alpha));
  const NodeId log_gammas = g.row_sum(g.lgamma(alpha));
  return g.sub(log_gammas, g.add(cross, log_norm));
}

NodeId marginal_nll_rows(Graph& g, NodeId mu, NodeId var, NodeId eps, Eigen::Index samples,
                         NodeId y, const DistributionHead& head) {
  if (samples < 1) throw InputError("marginal predictive: need at least one sample");
  const Eigen::Index dim = head.param_dim();
  const NodeId sd = g.sqrt(var);
  std::vector<NodeId> log_q;
  log_q.reserve(static_cast<std::size_t>(samples));
  for (Eigen::Index t = 0; t < samples; ++t) {
    const NodeId z = g.add(mu, g.mul(sd, g.cols(eps, t * dim, dim)));
    NodeId nll;
    if (head.kind == DistributionHead::Kind::gaussian) {
      const NodeId v = variance_transform(g, g.cols(z, 1, 1), head.variance_floor);
      nll = gaussian_nll_rows(g, g.cols(z, 0, 1), v, y);
    } else {
      nll = categorical_nll_rows(g, z, y);
    }
    log_q.push_back(g.scale(nll, -1.0));
  }
  const NodeId lse = g.logsumexp_rows(g.concat_cols(log_q));
  return g.shift(g.scale(lse, -1.0), std::log(static_cast<scalar_t>(samples)));
}

// ---------------------------------------------------------------------------
// Sufficient statistics.

ZMoments z_moments(std::span<const EnsembleOutput> batch) {
  require_nonempty(batch.size(), "z_moments");
  const Eigen::Index dim = batch.front().z.cols();
  ZMoments m{matrix_t(batch.size(), dim), matrix_t(batch.size(), dim)};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const EnsembleOutput& e = batch[i];
    e.validate();
    if (e.z.cols() != dim) throw InputError("z_moments: inconsistent parameter dimension");
    const Eigen::RowVectorXd mean = e.z.colwise().mean();
    m.mean.row(i) = mean;
    m.spread.row(i) = (e.z.rowwise() - mean).array().square().colwise().mean();
  }
  return m;
}

MixtureMoments mixture_moments(std::span<const EnsembleOutput> batch) {
  require_nonempty(batch.size(), "mixture_moments");
  MixtureMoments m{matrix_t(batch.size(), 1), matrix_t(batch.size(), 1)};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const EnsembleOutput& e = batch[i];
    e.validate();
    vector_t means(e.members()), vars(e.members());
    for (Eigen::Index j = 0; j < e.members(); ++j) {
      const auto p = e.head.gaussian_params(e.z.row(j).transpose());
      means(j) = p.mean;
      vars(j) = p.variance;
    }
    const scalar_t bar = means.mean();
    m.mean(i, 0) = bar;
    m.spread(i, 0) = vars.mean() + (means.array() - bar).square().mean();
  }
  return m;
}

matrix_t soft_targets(std::span<const EnsembleOutput> batch) {
  require_nonempty(batch.size(), "soft_targets");
  const Eigen::Index classes = batch.front().head.classes;
  matrix_t out(batch.size(), classes);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const EnsembleOutput& e = batch[i];
    e.validate();
    matrix_t probs(e.members(), classes);
    for (Eigen::Index j = 0; j < e.members(); ++j)
      probs.row(j) = e.head.class_probs(e.z.row(j).transpose()).transpose();
    out.row(i) = soft_target(probs).transpose();
  }
  return out;
}

matrix_t dirichlet_log_targets(std::span<const EnsembleOutput> batch, scalar_t gamma) {
  require_nonempty(batch.size(), "dirichlet_log_targets");
  const Eigen::Index classes = batch.front().head.classes;
  matrix_t out = matrix_t::Zero(batch.size(), classes);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const EnsembleOutput& e = batch[i];
    e.validate();
    for (Eigen::Index j = 0; j < e.members(); ++j) {
      const vector_t p = central_smoothing(e.head.class_probs(e.z.row(j).transpose()), gamma);
      if ((p.array() <= 0).any())
        throw InputError("dirichlet target on the simplex boundary at input " + std::to_string(i) +
                         "; apply central smoothing (gamma > 0)");
      out.row(i) += p.array().log().matrix().transpose();
    }
    out.row(i) /= static_cast<scalar_t>(e.members());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Value-level objectives.

scalar_t ensemble_nll(const matrix_t& x, const matrix_t& y, const Mlp& model,
                      const DistributionHead& head) {
  require_nonempty(static_cast<std::size_t>(x.rows()), "ensemble_nll");
  if (y.rows() != x.rows() || y.cols() != 1) throw InputError("ensemble_nll: y must be N x 1");
  if (model.spec().output_dim != head.param_dim())
    throw InputError("ensemble_nll: model output does not match head");
  Graph g;
  const NodeId out = model.build(g, g.input("x"));
  const NodeId target = g.input("y");
  NodeId rows;
  Bindings bind{{"x", x}};
  if (head.kind == DistributionHead::Kind::gaussian) {
    const NodeId var = variance_transform(g, g.cols(out, 1, 1), head.variance_floor);
    rows = gaussian_nll_rows(g, g.cols(out, 0, 1), var, target);
    bind["y"] = y;
  } else {
    rows = categorical_nll_rows(g, out, target);
    bind["y"] = one_hot(y, head.classes);
  }
  g.set_output(rows);
  return checked_mean(g.forward(bind, model.params()), "ensemble_nll");
}

vector_t soft_target(const matrix_t& probs) {
  if (probs.rows() < 1) throw InputError("soft_target: need at least one member");
  // Offsets from the first row average to exactly zero for identical members.
  const Eigen::RowVectorXd first = probs.row(0);
  return (first + (probs.rowwise() - first).colwise().mean()).transpose();
}

scalar_t categorical_mixture_kl(const vector_t& soft, const vector_t& model_probs) {
  if (soft.size() != model_probs.size()) throw InputError("categorical_mixture_kl: length mismatch");
  scalar_t h = 0;
  for (Eigen::Index k = 0; k < soft.size(); ++k) {
    if (soft(k) == 0) continue;
    if (!(model_probs(k) > 0))
      throw NumericalError("categorical_mixture_kl: model assigns zero probability to class " +
                           std::to_string(k) + " which has target mass");
    h -= soft(k) * std::log(model_probs(k));
  }
  return h;
}

scalar_t gaussian_mixture_kl_closed(std::span<const GaussianParams<>> members,
                                    const GaussianParams<>& fit) {
  if (members.empty()) throw InputError("gaussian_mixture_kl_closed: no members");
  if (!fit.valid()) throw InputError("gaussian_mixture_kl_closed: invalid fit");
  const auto m = static_cast<scalar_t>(members.size());
  scalar_t bar = 0;
  for (const auto& p : members) {
    if (!p.valid()) throw InputError("gaussian_mixture_kl_closed: invalid member");
    bar += p.mean;
  }
  bar /= m;
  scalar_t spread = 0;
  for (const auto& p : members) spread += p.variance + (p.mean - bar) * (p.mean - bar);
  spread /= m;
  const scalar_t shift = bar - fit.mean;
  return (spread + shift * shift) / (2.0 * fit.variance) + 0.5 * std::log(fit.variance);
}

scalar_t distribution_distill_nll(std::span<const EnsembleOutput> batch,
                                  std::span<const DiagGaussianOverZ> v) {
  if (batch.size() != v.size()) throw InputError("distribution_distill_nll: batch/v length mismatch");
  const ZMoments m = z_moments(batch);
  matrix_t mu(m.mean.rows(), m.mean.cols()), var(mu.rows(), mu.cols());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i].validate();
    if (v[i].dim() != mu.cols()) throw InputError("distribution_distill_nll: v dimension mismatch");
    mu.row(i) = v[i].mu.transpose();
    var.row(i) = v[i].var_diag.transpose();
  }
  Graph g;
  g.set_output(gaussian_over_z_nll_rows(g, g.constant(mu), g.constant(var), g.constant(m.mean),
                                        g.constant(m.spread)));
  return checked_mean(g.forward({}, {}), "distribution_distill_nll");
}

scalar_t distribution_distill_nll(std::span<const matrix_t> targets,
                                  std::span<const DirichletParams> v) {
  require_nonempty(targets.size(), "distribution_distill_nll");
  if (targets.size() != v.size()) throw InputError("distribution_distill_nll: batch/v length mismatch");
  const Eigen::Index classes = v.front().alpha.size();
  matrix_t alpha(v.size(), classes), mlt(v.size(), classes);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i].validate();
    const matrix_t& t = targets[i];
    if (v[i].alpha.size() != classes || t.cols() != classes || t.rows() < 1)
      throw InputError("distribution_distill_nll: dirichlet dimension mismatch");
    if ((t.array() <= 0).any())
      throw InputError("dirichlet target on the simplex boundary at input " + std::to_string(i) +
                       "; apply central smoothing first");
    alpha.row(i) = v[i].alpha.transpose();
    mlt.row(i) = t.array().log().colwise().mean();
  }
  Graph g;
  g.set_output(dirichlet_nll_rows(g, g.constant(alpha), g.constant(mlt)));
  return checked_mean(g.forward({}, {}), "distribution_distill_nll");
}

scalar_t labelled_pred_loss(const matrix_t& x, const matrix_t& y, const Mlp& model,
                            const DistributionHead& head, scalar_t lambda, Eigen::Index samples,
                            seed_t seed, scalar_t variance_floor) {
  if (lambda < 0) throw InputError("labelled_pred_loss: lambda must be non-negative");
  if (lambda == 0) return 0.0;
  require_nonempty(static_cast<std::size_t>(x.rows()), "labelled_pred_loss");
  const Eigen::Index dim = head.param_dim();
  if (model.spec().output_dim != 2 * dim)
    throw InputError("labelled_pred_loss: model must output mean and variance for each parameter");
  Graph g;
  const NodeId out = model.build(g, g.input("x"));
  const NodeId mu = g.cols(out, 0, dim);
  const NodeId var = variance_transform(g, g.cols(out, dim, dim), variance_floor);
  const NodeId rows = marginal_nll_rows(g, mu, var, g.input("eps"), samples, g.input("y"), head);
  g.set_output(rows);
  const matrix_t eps = sample_standard_normal(samples, dim, seed);
  Bindings bind{{"x", x},
                {"eps", eps.reshaped<Eigen::RowMajor>().transpose()},
                {"y", head.kind == DistributionHead::Kind::gaussian ? y : one_hot(y, head.classes)}};
  return lambda * checked_mean(g.forward(bind, model.params()), "labelled_pred_loss");
}

}  // namespace edd
