#include "edd/training.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "edd/optimizer.hpp"

namespace edd {

namespace {

constexpr const char* kMixtureTag = "mixture";
constexpr const char* kGaussianOverZTag = "gaussian-over-z";
constexpr const char* kDirichletTag = "dirichlet";

std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, seed_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

matrix_t gather_rows(const matrix_t& m, std::span<const Eigen::Index> idx) {
  matrix_t out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

/// Row-aligned training arrays bound by name for each mini-batch.
struct RowInputs {
  std::vector<std::pair<std::string, matrix_t>> arrays;

  Eigen::Index rows() const { return arrays.front().second.rows(); }

  Bindings batch(std::span<const Eigen::Index> idx, const Bindings& fixed) const {
    Bindings b = fixed;
    for (const auto& [name, m] : arrays) b[name] = gather_rows(m, idx);
    return b;
  }
};

/// One epoch of shuffled mini-batch Adam on `graph`'s scalar output.
/// `extra` may add gradient contributions per step; it returns their loss.
template <typename Extra>
scalar_t run_epoch(Graph& graph, const RowInputs& inputs, const Bindings& fixed, Mlp& model,
                   OptimizerState& opt, Eigen::Index batch_size, seed_t shuffle_seed, Extra&& extra,
                   std::uint64_t epoch) {
  const auto order = shuffled_indices(inputs.rows(), shuffle_seed);
  scalar_t weighted = 0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    const std::span<const Eigen::Index> idx(order.data() + start, stop - start);
    const scalar_t loss = graph.forward(inputs.batch(idx, fixed), model.params())(0, 0);
    ParameterSet grads = graph.backward(model.params());
    const scalar_t extra_loss = extra(grads);
    const scalar_t total = loss + extra_loss;
    if (!std::isfinite(total))
      throw NumericalError("non-finite loss in epoch " + std::to_string(epoch));
    adam_step(opt, model.params(), grads);
    weighted += total * static_cast<scalar_t>(idx.size());
  }
  return weighted / static_cast<scalar_t>(order.size());
}

struct NoExtra {
  scalar_t operator()(ParameterSet&) const { return 0.0; }
};

struct MemberOutcome {
  std::optional<TrainedModel> model;
  std::vector<TrainLogRow> log;
  std::optional<MemberFailure> failure;
};

MemberOutcome train_member(const matrix_t& x, const matrix_t& targets, const DistributionHead& head,
                           const EnsembleConfig& cfg, std::size_t member) {
  MlpSpec spec = cfg.member_spec;
  spec.input_dim = x.cols();
  spec.output_dim = head.param_dim();
  spec.seed = cfg.base_seed + member;
  TrainedModel model{Mlp(spec), head};

  Graph graph;
  const NodeId out = model.network.build(graph, graph.input("x"));
  const NodeId target = graph.input("target");
  NodeId rows;
  if (head.kind == DistributionHead::Kind::gaussian) {
    const NodeId var = variance_transform(graph, graph.cols(out, 1, 1), head.variance_floor);
    rows = gaussian_nll_rows(graph, graph.cols(out, 0, 1), var, target);
  } else {
    rows = categorical_nll_rows(graph, out, target);
  }
  graph.set_output(graph.mean(rows));

  RowInputs inputs{{{"x", x}, {"target", targets}}};
  OptimizerState opt = OptimizerState::for_params(model.network.params(), AdamConfig{cfg.lr});
  MemberOutcome outcome;
  for (std::uint64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    try {
      const scalar_t loss = run_epoch(graph, inputs, {}, model.network, opt, cfg.batch_size,
                                      derive_seed(spec.seed, epoch), NoExtra{}, epoch);
      outcome.log.push_back({epoch, member, loss, 1.0, cfg.lr});
    } catch (const NumericalError& e) {
      outcome.failure = MemberFailure{member, epoch, e.what()};
      return outcome;
    }
  }
  outcome.model = std::move(model);
  return outcome;
}

EnsembleResult train_ensemble_impl(const matrix_t& x, const matrix_t& targets,
                                   const DistributionHead& head, const EnsembleConfig& cfg) {
  cfg.validate();
  if (x.rows() < 1) throw InputError("train_ensemble: empty training data");
  std::vector<MemberOutcome> outcomes(cfg.members);
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, cfg.members));
  if (workers == 1) {
    for (std::size_t j = 0; j < cfg.members; ++j) outcomes[j] = train_member(x, targets, head, cfg, j);
  } else {
    // Members are independent; each worker owns a disjoint stride of slots.
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t j = w; j < cfg.members; j += workers)
            outcomes[j] = train_member(x, targets, head, cfg, j);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  EnsembleResult result;
  for (std::size_t j = 0; j < cfg.members; ++j) {
    MemberOutcome& o = outcomes[j];
    result.log.insert(result.log.end(), o.log.begin(), o.log.end());
    if (o.failure) {
      result.failures.push_back(*o.failure);
    } else {
      result.members.push_back(std::move(*o.model));
      result.member_indices.push_back(j);
    }
  }
  std::stable_sort(result.log.begin(), result.log.end(), [](const TrainLogRow& a, const TrainLogRow& b) {
    return a.epoch != b.epoch ? a.epoch < b.epoch : a.member < b.member;
  });
  return result;
}

scalar_t attribute(const ModelRecord& r, const std::string& name) {
  const auto it = r.attributes.find(name);
  if (it == r.attributes.end()) throw InputError("model file: missing attribute '" + name + "'");
  return it->second;
}

DistributionHead head_from_attributes(const ModelRecord& r, const std::string& prefix) {
  const auto classes = static_cast<Eigen::Index>(attribute(r, prefix + "classes"));
  if (classes == 0) return DistributionHead::gaussian(attribute(r, prefix + "variance_floor"));
  return DistributionHead::categorical(classes);
}

void head_to_attributes(const DistributionHead& h, ModelRecord& r, const std::string& prefix) {
  r.attributes[prefix + "classes"] =
      h.kind == DistributionHead::Kind::gaussian ? 0.0 : static_cast<scalar_t>(h.classes);
  if (h.kind == DistributionHead::Kind::gaussian) r.attributes[prefix + "variance_floor"] = h.variance_floor;
}

}  // namespace

// ---------------------------------------------------------------------------

ModelRecord TrainedModel::to_record() const {
  ModelRecord r{network, std::string(head.tag()), {}};
  head_to_attributes(head, r, "");
  return r;
}

TrainedModel TrainedModel::from_record(const ModelRecord& record) {
  if (record.head_tag != "gaussian" && record.head_tag != "categorical")
    throw InputError("model file holds a '" + record.head_tag + "' model, not an ensemble member");
  TrainedModel m{record.network, head_from_attributes(record, "")};
  if (std::string(m.head.tag()) != record.head_tag) throw InputError("model file: head attributes disagree with tag");
  if (m.network.spec().output_dim != m.head.param_dim())
    throw InputError("model file: output width does not match head");
  return m;
}

void EnsembleConfig::validate() const {
  if (members < 1) throw InputError("ensemble: need at least one member");
  if (batch_size < 1) throw InputError("ensemble: batch_size must be positive");
  if (!(lr > 0)) throw InputError("ensemble: lr must be positive");
  if (!(variance_floor > 0)) throw InputError("ensemble: variance_floor must be positive");
  if (member_spec.hidden.empty()) throw InputError("ensemble: at least one hidden layer is required");
}

EnsembleResult train_ensemble(const RegressionSet& data, const EnsembleConfig& cfg) {
  data.validate();
  return train_ensemble_impl(data.x, data.y, DistributionHead::gaussian(cfg.variance_floor), cfg);
}

EnsembleResult train_ensemble(const ClassificationSet& data, const EnsembleConfig& cfg) {
  data.validate();
  matrix_t labels(data.size(), 1);
  for (Eigen::Index i = 0; i < data.size(); ++i)
    labels(i, 0) = static_cast<scalar_t>(data.labels[static_cast<std::size_t>(i)]);
  return train_ensemble_impl(data.x, one_hot(labels, data.classes),
                             DistributionHead::categorical(data.classes), cfg);
}

std::vector<EnsembleOutput> collect_ensemble_outputs(std::span<const TrainedModel> members,
                                                     const matrix_t& pool) {
  if (members.empty()) throw InputError("collect_ensemble_outputs: no members");
  const DistributionHead& head = members.front().head;
  std::vector<matrix_t> per_member;
  for (const TrainedModel& m : members) {
    if (!(m.head == head)) throw InputError("collect_ensemble_outputs: members use different heads");
    per_member.push_back(m.network.predict(pool));
  }
  const auto count = static_cast<Eigen::Index>(members.size());
  std::vector<EnsembleOutput> out;
  out.reserve(static_cast<std::size_t>(pool.rows()));
  for (Eigen::Index i = 0; i < pool.rows(); ++i) {
    EnsembleOutput e{matrix_t(count, head.param_dim()), head};
    for (Eigen::Index j = 0; j < count; ++j) e.z.row(j) = per_member[static_cast<std::size_t>(j)].row(i);
    out.push_back(std::move(e));
  }
  return out;
}

std::string_view to_string(DistillMethod m) {
  switch (m) {
    case DistillMethod::mixture: return kMixtureTag;
    case DistillMethod::gaussian_over_z: return kGaussianOverZTag;
    case DistillMethod::dirichlet: return kDirichletTag;
  }
  return kGaussianOverZTag;
}

DistillMethod parse_distill_method(std::string_view name) {
  if (name == kMixtureTag) return DistillMethod::mixture;
  if (name == kGaussianOverZTag) return DistillMethod::gaussian_over_z;
  if (name == kDirichletTag) return DistillMethod::dirichlet;
  throw InputError("unknown distillation method '" + std::string(name) + "'");
}

void DistillConfig::validate() const {
  if (batch_size < 1) throw InputError("distill: batch_size must be positive");
  if (!(lr0 > 0)) throw InputError("distill: lr0 must be positive");
  if (lr_decay < 0) throw InputError("distill: lr_decay must be non-negative");
  if (lr_stride < 1) throw InputError("distill: lr_stride must be positive");
  if (!(variance_floor > 0)) throw InputError("distill: variance_floor must be positive");
  if (lambda < 0) throw InputError("distill: lambda must be non-negative");
  if (pred_samples < 1) throw InputError("distill: pred_samples must be positive");
  if (!(smoothing >= 0 && smoothing < 1)) throw InputError("distill: smoothing must lie in [0, 1)");
  if (!(mixture_temperature > 0)) throw InputError("distill: mixture_temperature must be positive");
  if (distilled_spec.hidden.empty()) throw InputError("distill: at least one hidden layer is required");
  annealing.validate();
}

Eigen::Index DistilledModel::output_dim(DistillMethod method, const DistributionHead& base_head) {
  switch (method) {
    case DistillMethod::mixture: return base_head.param_dim();
    case DistillMethod::gaussian_over_z: return 2 * base_head.param_dim();
    case DistillMethod::dirichlet:
      if (base_head.kind != DistributionHead::Kind::categorical)
        throw InputError("dirichlet distillation requires a categorical ensemble");
      return base_head.classes;
  }
  return 0;
}

matrix_t DistilledModel::raw(const matrix_t& x) const { return network.predict(x); }

DiagGaussianOverZ DistilledModel::z_distribution(const vector_t& raw_row) const {
  if (method != DistillMethod::gaussian_over_z) throw InputError("model is not a gaussian-over-z model");
  const Eigen::Index d = base_head.param_dim();
  DiagGaussianOverZ v{raw_row.head(d), vector_t(d)};
  for (Eigen::Index i = 0; i < d; ++i) v.var_diag(i) = softplus_variance(raw_row(d + i), variance_floor);
  return v;
}

DirichletParams DistilledModel::dirichlet(const vector_t& raw_row) const {
  if (method != DistillMethod::dirichlet) throw InputError("model is not a dirichlet model");
  return {raw_row.array().exp()};
}

ModelRecord DistilledModel::to_record() const {
  ModelRecord r{network, std::string(to_string(method)), {}};
  head_to_attributes(base_head, r, "base_");
  r.attributes["variance_floor"] = variance_floor;
  return r;
}

DistilledModel DistilledModel::from_record(const ModelRecord& record) {
  DistilledModel m;
  m.method = parse_distill_method(record.head_tag);
  m.base_head = head_from_attributes(record, "base_");
  m.variance_floor = attribute(record, "variance_floor");
  m.network = record.network;
  if (m.network.spec().output_dim != output_dim(m.method, m.base_head))
    throw InputError("model file: output width does not match distillation method");
  return m;
}

DistillResult distill(std::span<const EnsembleOutput> outputs, const matrix_t& pool,
                      const DistillConfig& cfg, const std::optional<LabelledData>& labelled) {
  cfg.validate();
  if (outputs.empty()) throw InputError("distill: no ensemble outputs");
  if (static_cast<Eigen::Index>(outputs.size()) != pool.rows())
    throw InputError("distill: pool and ensemble outputs differ in length");
  const DistributionHead base = outputs.front().head;
  for (const EnsembleOutput& e : outputs)
    if (!(e.head == base)) throw InputError("distill: ensemble outputs use different heads");

  MlpSpec spec = cfg.distilled_spec;
  spec.input_dim = pool.cols();
  spec.output_dim = DistilledModel::output_dim(cfg.method, base);
  spec.seed = cfg.seed;
  DistilledModel model{Mlp(spec), cfg.method, base, cfg.variance_floor};

  Graph graph;
  const NodeId out = model.network.build(graph, graph.input("x"));
  RowInputs inputs{{{"x", pool}}};
  Bindings fixed;
  NodeId rows;
  const bool gaussian_base = base.kind == DistributionHead::Kind::gaussian;
  const bool annealed = cfg.method == DistillMethod::dirichlet;

  switch (cfg.method) {
    case DistillMethod::mixture:
      if (gaussian_base) {
        const MixtureMoments m = mixture_moments(outputs);
        inputs.arrays.emplace_back("mix_mean", m.mean);
        inputs.arrays.emplace_back("mix_spread", m.spread);
        const NodeId var = variance_transform(graph, graph.cols(out, 1, 1), base.variance_floor);
        rows = gaussian_mixture_kl_rows(graph, graph.cols(out, 0, 1), var, graph.input("mix_mean"),
                                        graph.input("mix_spread"));
      } else {
        inputs.arrays.emplace_back("soft", soft_targets(outputs));
        rows = categorical_nll_rows(graph, out, graph.input("soft"), cfg.mixture_temperature);
      }
      break;
    case DistillMethod::gaussian_over_z: {
      const ZMoments m = z_moments(outputs);
      const Eigen::Index d = base.param_dim();
      inputs.arrays.emplace_back("z_mean", m.mean);
      inputs.arrays.emplace_back("z_spread", m.spread);
      const NodeId var = variance_transform(graph, graph.cols(out, d, d), cfg.variance_floor);
      rows = gaussian_over_z_nll_rows(graph, graph.cols(out, 0, d), var, graph.input("z_mean"),
                                      graph.input("z_spread"));
      break;
    }
    case DistillMethod::dirichlet: {
      inputs.arrays.emplace_back("log_targets", dirichlet_log_targets(outputs, cfg.smoothing));
      const NodeId alpha = graph.exp(graph.mul(out, graph.input("inv_temperature")));
      rows = dirichlet_nll_rows(graph, alpha, graph.input("log_targets"));
      break;
    }
  }
  graph.set_output(graph.mean(rows));

  // Optional labelled term, a second graph over the same parameters.
  const bool use_pred = cfg.lambda > 0;
  Graph pred_graph;
  Bindings pred_fixed;
  if (use_pred) {
    if (cfg.method != DistillMethod::gaussian_over_z)
      throw InputError("distill: the labelled term requires the gaussian-over-z method");
    if (!labelled || labelled->x.rows() < 1)
      throw InputError("distill: lambda > 0 requires labelled data");
    if (labelled->x.cols() != pool.cols() || labelled->y.rows() != labelled->x.rows())
      throw InputError("distill: labelled data shape mismatch");
    const Eigen::Index d = base.param_dim();
    const NodeId pout = model.network.build(pred_graph, pred_graph.input("x"));
    const NodeId var = variance_transform(pred_graph, pred_graph.cols(pout, d, d), cfg.variance_floor);
    const NodeId nll = marginal_nll_rows(pred_graph, pred_graph.cols(pout, 0, d), var,
                                         pred_graph.input("eps"), cfg.pred_samples,
                                         pred_graph.input("y"), base);
    pred_graph.set_output(pred_graph.scale(pred_graph.mean(nll), cfg.lambda));
    pred_fixed["x"] = labelled->x;
    pred_fixed["y"] = gaussian_base ? labelled->y : one_hot(labelled->y, base.classes);
  }

  OptimizerState opt = OptimizerState::for_params(model.network.params());
  DistillResult result;
  std::uint64_t step = 0;
  for (std::uint64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const scalar_t lr = lr_schedule(schedule_step(epoch, cfg.lr_stride), cfg.lr0, cfg.lr_decay);
    opt.config.lr = lr;
    const scalar_t temperature = annealed ? anneal_temperature(epoch, cfg.annealing) : 1.0;
    if (annealed) fixed["inv_temperature"] = matrix_t::Constant(1, 1, 1.0 / temperature);

    auto extra = [&](ParameterSet& grads) -> scalar_t {
      if (!use_pred) return 0.0;
      const matrix_t eps = sample_standard_normal(cfg.pred_samples, base.param_dim(),
                                                  derive_seed(cfg.seed ^ 0x5EEDULL, step++));
      pred_fixed["eps"] = eps.reshaped<Eigen::RowMajor>().transpose();
      const scalar_t loss = pred_graph.forward(pred_fixed, model.network.params())(0, 0);
      const ParameterSet g = pred_graph.backward(model.network.params());
      for (auto& [name, value] : grads) value += g.at(name);
      return loss;
    };
    const scalar_t loss = run_epoch(graph, inputs, fixed, model.network, opt, cfg.batch_size,
                                    derive_seed(cfg.seed, epoch), extra, epoch);
    result.log.push_back({epoch, 0, loss, temperature, lr});
  }
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation.

namespace {

void destandardize(PointPrediction& p, scalar_t y_mean, scalar_t y_scale, UncertaintyMeasure measure) {
  p.mean = p.mean * y_scale + y_mean;
  p.log_density -= std::log(y_scale);
  const bool variance = measure == UncertaintyMeasure::variance;
  auto map = [&](scalar_t v) { return variance ? v * y_scale * y_scale : v + std::log(y_scale); };
  p.total = map(p.total);
  if (p.report) *p.report = UncertaintyReport::from_parts(map(p.report->total), map(p.report->aleatoric),
                                                          p.report->measure, p.report->sample_count);
}

RegressionEvaluation summarize_regression(std::vector<PointPrediction> points, const RegressionSet& data,
                                          const EvalOptions& opts) {
  RegressionEvaluation ev;
  vector_t y = data.y;
  if (opts.destandardize) {
    y = opts.destandardize->inverse_y(data.y);
    for (auto& p : points)
      destandardize(p, opts.destandardize->y_mean, opts.destandardize->y_scale, opts.measure);
  }
  std::vector<scalar_t> preds, targets, logd, errors, unc;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const PointPrediction& p = points[i];
    if (!std::isfinite(p.mean) || !std::isfinite(p.total) || !std::isfinite(p.log_density))
      throw NumericalError("evaluate: non-finite prediction at point " + std::to_string(i));
    preds.push_back(p.mean);
    targets.push_back(y(static_cast<Eigen::Index>(i)));
    logd.push_back(p.log_density);
    errors.push_back(std::abs(p.mean - targets.back()));
    unc.push_back(p.total);
  }
  ev.rmse = rmse(preds, targets);
  ev.nll = predictive_nll(logd);
  if (points.size() >= 2 && *std::max_element(errors.begin(), errors.end()) > 0) {
    ev.curves = sparsification(errors, unc, opts.sparsification_steps);
    ev.ause = ause(ev.curves.model, ev.curves.oracle);
  }
  ev.points = std::move(points);
  return ev;
}

ClassificationEvaluation summarize_classification(std::vector<PointPrediction> points,
                                                  const ClassificationSet& data) {
  ClassificationEvaluation ev;
  std::vector<Eigen::Index> predicted;
  std::vector<scalar_t> conf, logd;
  const auto correct = std::make_unique<bool[]>(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const PointPrediction& p = points[i];
    if (!std::isfinite(p.confidence) || !std::isfinite(p.total))
      throw NumericalError("evaluate: non-finite prediction at point " + std::to_string(i));
    predicted.push_back(p.predicted_class);
    conf.push_back(std::clamp(p.confidence, 0.0, 1.0));
    correct[i] = p.predicted_class == data.labels[i];
    logd.push_back(p.log_density);
  }
  ev.accuracy = accuracy(predicted, data.labels);
  ev.buckets = ece_buckets(conf, std::span<const bool>(correct.get(), points.size()));
  ev.ece = ev.buckets.ece;
  ev.nll = predictive_nll(logd);
  ev.points = std::move(points);
  return ev;
}

PointPrediction classify_point(const vector_t& probs, Eigen::Index label) {
  PointPrediction p;
  Eigen::Index k = 0;
  p.confidence = probs.maxCoeff(&k);
  p.predicted_class = k;
  p.mean = static_cast<scalar_t>(k);
  p.total = categorical_entropy(probs);
  p.log_density = std::log(probs(label));
  return p;
}

}  // namespace

RegressionEvaluation evaluate(std::span<const TrainedModel> ensemble, const RegressionSet& data,
                              const EvalOptions& opts) {
  data.validate();
  if (data.size() < 1) throw InputError("evaluate: empty dataset");
  const auto outputs = collect_ensemble_outputs(ensemble, data.x);
  if (outputs.front().head.kind != DistributionHead::Kind::gaussian)
    throw InputError("evaluate: regression data needs a Gaussian ensemble");
  std::vector<PointPrediction> points;
  points.reserve(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const EnsembleOutput& e = outputs[i];
    std::vector<GaussianParams<>> comps;
    for (Eigen::Index j = 0; j < e.members(); ++j) comps.push_back(e.head.gaussian_params(e.z.row(j).transpose()));
    const GaussianMixture mix(comps);
    PointPrediction p;
    p.mean = mix.mean();
    p.log_density = mix.log_pdf(data.y(static_cast<Eigen::Index>(i)));
    p.report = decompose_gaussians(comps, opts.measure,
                                   {opts.entropy_samples, derive_seed(opts.seed, i)});
    p.total = p.report->total;
    points.push_back(std::move(p));
  }
  return summarize_regression(std::move(points), data, opts);
}

RegressionEvaluation evaluate(const DistilledModel& model, const RegressionSet& data,
                              const EvalOptions& opts) {
  data.validate();
  if (data.size() < 1) throw InputError("evaluate: empty dataset");
  if (model.base_head.kind != DistributionHead::Kind::gaussian)
    throw InputError("evaluate: regression data needs a Gaussian distilled model");
  const matrix_t raw = model.raw(data.x);
  std::vector<PointPrediction> points;
  points.reserve(static_cast<std::size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const vector_t row = raw.row(i).transpose();
    const scalar_t y = data.y(i);
    PointPrediction p;
    if (model.method == DistillMethod::mixture) {
      const auto q = model.base_head.gaussian_params(row);
      p.mean = q.mean;
      p.total = opts.measure == UncertaintyMeasure::variance ? q.variance : gaussian_entropy(q.variance);
      p.log_density = gaussian_log_pdf(y, q);
    } else if (model.method == DistillMethod::gaussian_over_z) {
      const DiagGaussianOverZ v = model.z_distribution(row);
      const seed_t seed = derive_seed(opts.seed, static_cast<std::uint64_t>(i));
      const MarginalPredictive q = marginal_predictive(v, model.base_head, opts.samples, seed);
      p.mean = q.mean();
      p.log_density = q.log_prob(y);
      p.report = distilled_decompose(v, model.base_head, opts.measure, opts.samples, seed,
                                     {opts.entropy_samples, derive_seed(seed, 1)});
      p.total = p.report->total;
    } else {
      throw InputError("evaluate: dirichlet models apply to classification only");
    }
    points.push_back(std::move(p));
  }
  return summarize_regression(std::move(points), data, opts);
}

ClassificationEvaluation evaluate(std::span<const TrainedModel> ensemble, const ClassificationSet& data,
                                  const EvalOptions& opts) {
  data.validate();
  if (data.size() < 1) throw InputError("evaluate: empty dataset");
  (void)opts;
  const auto outputs = collect_ensemble_outputs(ensemble, data.x);
  if (outputs.front().head.kind != DistributionHead::Kind::categorical)
    throw InputError("evaluate: classification data needs a categorical ensemble");
  std::vector<PointPrediction> points;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const EnsembleOutput& e = outputs[i];
    matrix_t probs(e.members(), e.head.classes);
    for (Eigen::Index j = 0; j < e.members(); ++j) probs.row(j) = e.head.class_probs(e.z.row(j).transpose()).transpose();
    PointPrediction p = classify_point(soft_target(probs), data.labels[i]);
    p.report = decompose_categoricals(probs, UncertaintyMeasure::entropy);
    points.push_back(std::move(p));
  }
  return summarize_classification(std::move(points), data);
}

ClassificationEvaluation evaluate(const DistilledModel& model, const ClassificationSet& data,
                                  const EvalOptions& opts) {
  data.validate();
  if (data.size() < 1) throw InputError("evaluate: empty dataset");
  if (model.base_head.kind != DistributionHead::Kind::categorical)
    throw InputError("evaluate: classification data needs a categorical distilled model");
  const matrix_t raw = model.raw(data.x);
  std::vector<PointPrediction> points;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const vector_t row = raw.row(i).transpose();
    const Eigen::Index label = data.labels[static_cast<std::size_t>(i)];
    PointPrediction p;
    switch (model.method) {
      case DistillMethod::mixture:
        p = classify_point(model.base_head.class_probs(row), label);
        break;
      case DistillMethod::gaussian_over_z: {
        const DiagGaussianOverZ v = model.z_distribution(row);
        const seed_t seed = derive_seed(opts.seed, static_cast<std::uint64_t>(i));
        p = classify_point(marginal_predictive(v, model.base_head, opts.samples, seed).class_probs, label);
        p.report = distilled_decompose(v, model.base_head, UncertaintyMeasure::entropy, opts.samples, seed);
        break;
      }
      case DistillMethod::dirichlet: {
        const DirichletParams a = model.dirichlet(row);
        p = classify_point(a.alpha / a.alpha.sum(), label);
        p.report = distilled_decompose(a, UncertaintyMeasure::entropy);
        break;
      }
    }
    points.push_back(std::move(p));
  }
  return summarize_classification(std::move(points), data);
}

}  // namespace edd
