#include "edd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace edd {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config reading.

class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw InputError("config: '" + name_ + "' must be an object");
  }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, value] : j_.items())
      if (std::find(keys.begin(), keys.end(), key) == keys.end())
        throw InputError("config: unknown key '" + where(key) + "'");
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string where(std::string_view key) const { return name_.empty() ? std::string(key) : name_ + "." + std::string(key); }

  void real(const char* key, scalar_t& out) const {
    if (!has(key)) return;
    if (!j_.at(key).is_number()) throw InputError("config: '" + where(key) + "' must be a number");
    out = j_.at(key).get<scalar_t>();
    if (!std::isfinite(out)) throw InputError("config: '" + where(key) + "' must be finite");
  }

  template <typename Int>
  void count(const char* key, Int& out, std::int64_t min = 0) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw InputError("config: '" + where(key) + "' must be an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      out = static_cast<Int>(v.get<std::uint64_t>());
      return;
    }
    const auto i = v.get<std::int64_t>();
    if (i < min) throw InputError("config: '" + where(key) + "' must be at least " + std::to_string(min));
    out = static_cast<Int>(i);
  }

  void text(const char* key, std::string& out) const {
    if (!has(key)) return;
    if (!j_.at(key).is_string()) throw InputError("config: '" + where(key) + "' must be a string");
    out = j_.at(key).get<std::string>();
  }

  void widths(const char* key, std::vector<Eigen::Index>& out) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array() || v.empty()) throw InputError("config: '" + where(key) + "' must be a non-empty array");
    out.clear();
    for (const json& w : v) {
      if (!w.is_number_integer() || w.get<std::int64_t>() < 1)
        throw InputError("config: '" + where(key) + "' entries must be positive integers");
      out.push_back(w.get<Eigen::Index>());
    }
  }

 private:
  const json& j_;
  std::string name_;
};

void read_dataset(const Section& s, DatasetConfig& d, const fs::path& base_dir) {
  s.allow({"kind", "n", "x_lo", "x_hi", "noise", "pool_n", "pool_lo", "pool_hi", "eval_n", "eval_lo",
           "eval_hi", "n_per_class", "centers", "spread", "path", "target", "folds", "fold"});
  s.count("n", d.n, 1);
  s.real("x_lo", d.x_lo);
  s.real("x_hi", d.x_hi);
  if (s.has("noise")) {
    std::string noise;
    s.text("noise", noise);
    if (noise == "variance") d.noise = NoiseScale::variance;
    else if (noise == "standard-deviation") d.noise = NoiseScale::standard_deviation;
    else throw InputError("config: 'dataset.noise' must be variance or standard-deviation");
  }
  s.count("pool_n", d.pool_n, 1);
  s.real("pool_lo", d.pool_lo);
  s.real("pool_hi", d.pool_hi);
  s.count("eval_n", d.eval_n, 0);
  s.real("eval_lo", d.eval_lo);
  s.real("eval_hi", d.eval_hi);
  s.count("n_per_class", d.n_per_class, 1);
  s.real("spread", d.spread);
  if (s.has("centers")) {
    const json& c = s.at("centers");
    if (!c.is_array() || c.size() < 2 || !c[0].is_array() || c[0].empty())
      throw InputError("config: 'dataset.centers' must be a list of at least two points");
    d.centers.resize(static_cast<Eigen::Index>(c.size()), static_cast<Eigen::Index>(c[0].size()));
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (!c[k].is_array() || c[k].size() != c[0].size())
        throw InputError("config: 'dataset.centers' rows must have equal length");
      for (std::size_t i = 0; i < c[k].size(); ++i) {
        if (!c[k][i].is_number()) throw InputError("config: 'dataset.centers' entries must be numbers");
        d.centers(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = c[k][i].get<scalar_t>();
      }
    }
  }
  std::string path;
  s.text("path", path);
  if (!path.empty()) d.path = fs::path(path).is_absolute() ? fs::path(path) : base_dir / path;
  s.text("target", d.target);
  s.count("folds", d.folds, 2);
  s.count("fold", d.fold, 0);
  if (!(d.x_lo < d.x_hi) || !(d.pool_lo < d.pool_hi) || !(d.eval_lo < d.eval_hi))
    throw InputError("config: dataset intervals must satisfy lo < hi");
  if (d.fold >= d.folds) throw InputError("config: 'dataset.fold' must be below 'dataset.folds'");
  if (d.kind == DatasetKind::csv && d.path.empty()) throw InputError("config: csv dataset needs 'dataset.path'");
}

void read_activation(const Section& s, MlpSpec& spec) {
  std::string a;
  s.text("activation", a);
  if (!a.empty()) spec.activation = parse_activation(a);
}

void read_ensemble(const Section& s, EnsembleConfig& e) {
  s.allow({"members", "hidden", "activation", "epochs", "batch_size", "lr", "variance_floor"});
  s.count("members", e.members, 1);
  s.widths("hidden", e.member_spec.hidden);
  read_activation(s, e.member_spec);
  s.count("epochs", e.epochs, 0);
  s.count("batch_size", e.batch_size, 1);
  s.real("lr", e.lr);
  s.real("variance_floor", e.variance_floor);
  e.validate();
}

void read_distill(const Section& s, DistillConfig& d) {
  s.allow({"method", "hidden", "activation", "epochs", "batch_size", "lr0", "lr_decay", "lr_stride",
           "variance_floor", "lambda", "pred_samples", "annealing", "smoothing", "mixture_temperature"});
  std::string method;
  s.text("method", method);
  if (!method.empty()) d.method = parse_distill_method(method);
  s.widths("hidden", d.distilled_spec.hidden);
  read_activation(s, d.distilled_spec);
  s.count("epochs", d.epochs, 0);
  s.count("batch_size", d.batch_size, 1);
  s.real("lr0", d.lr0);
  s.real("lr_decay", d.lr_decay);
  s.count("lr_stride", d.lr_stride, 1);
  s.real("variance_floor", d.variance_floor);
  s.real("lambda", d.lambda);
  s.count("pred_samples", d.pred_samples, 1);
  s.real("smoothing", d.smoothing);
  s.real("mixture_temperature", d.mixture_temperature);
  if (s.has("annealing")) {
    const Section a(s.at("annealing"), s.where("annealing"));
    a.allow({"initial", "hold_epochs", "decay", "minimum"});
    a.real("initial", d.annealing.initial);
    a.count("hold_epochs", d.annealing.hold_epochs, 0);
    a.real("decay", d.annealing.decay);
    a.real("minimum", d.annealing.minimum);
  }
  d.validate();
}

void read_evaluate(const Section& s, EvaluateConfig& e) {
  s.allow({"measure", "samples", "entropy_samples", "sparsification_steps", "histogram_bins"});
  std::string m;
  s.text("measure", m);
  if (!m.empty()) e.measure = parse_measure(m);
  s.count("samples", e.samples, 1);
  s.count("entropy_samples", e.entropy_samples, 1);
  s.count("sparsification_steps", e.sparsification_steps, 2);
  s.count("histogram_bins", e.histogram_bins, 1);
}

// ---------------------------------------------------------------------------
// CSV output. Reals carry 17 significant digits; non-finite cells are errors.

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, std::initializer_list<std::string_view> header) : path_(path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    os_.open(path, std::ios::binary);
    if (!os_) throw InputError("cannot write " + path.string());
    os_ << std::setprecision(17);
    bool first = true;
    for (auto h : header) {
      os_ << (first ? "" : ",") << h;
      first = false;
    }
    os_ << '\n';
  }

  CsvWriter& cell(scalar_t v) {
    if (!std::isfinite(v)) throw NumericalError("non-finite value in " + path_.string());
    sep();
    os_ << v;
    return *this;
  }
  CsvWriter& cell(std::string_view s) {
    sep();
    os_ << s;
    return *this;
  }
  CsvWriter& cell(std::uint64_t v) {
    sep();
    os_ << v;
    return *this;
  }
  void end() {
    os_ << '\n';
    fresh_ = true;
  }

 private:
  void sep() {
    if (!fresh_) os_ << ',';
    fresh_ = false;
  }

  fs::path path_;
  std::ofstream os_;
  bool fresh_ = true;
};

std::string method_slug(DistillMethod m) {
  std::string s(to_string(m));
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

std::string member_file(std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "member_%03zu.model", j);
  return buf;
}

void sort_by_x(RegressionSet& s) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(s.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return s.x(a, 0) < s.x(b, 0); });
  RegressionSet out{matrix_t(s.x.rows(), s.x.cols()), vector_t(s.y.size()), s.provenance};
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = s.x.row(idx[i]);
    out.y(static_cast<Eigen::Index>(i)) = s.y(idx[i]);
  }
  s = std::move(out);
}

EvalOptions eval_options(const ExperimentConfig& cfg, const Task& task) {
  EvalOptions o;
  o.measure = cfg.evaluate.measure;
  o.samples = cfg.evaluate.samples;
  o.entropy_samples = cfg.evaluate.entropy_samples;
  o.sparsification_steps = cfg.evaluate.sparsification_steps;
  o.seed = cfg.sampling_seed();
  o.destandardize = task.stats;
  return o;
}

MetricsRow row_for(const Task& task, std::string model, const RegressionEvaluation& e) {
  return {task.dataset_name, task.fold, std::move(model), e.rmse, e.nll, e.ause, 0, 0};
}

MetricsRow row_for(const Task& task, std::string model, const ClassificationEvaluation& e) {
  return {task.dataset_name, task.fold, std::move(model), 0, e.nll, 0, e.accuracy, e.ece};
}

void write_sparsification(const fs::path& path, const Sparsification& s) {
  CsvWriter w(path, {"fraction", "model_err", "oracle_err", "se"});
  for (Eigen::Index i = 0; i < s.model.fractions_removed.size(); ++i) {
    const scalar_t m = s.model.normalized_error(i), o = s.oracle.normalized_error(i);
    w.cell(s.model.fractions_removed(i)).cell(m).cell(o).cell(m - o);
    w.end();
  }
}

void write_histogram(const fs::path& path, const std::vector<scalar_t>& ensemble,
                     const std::vector<scalar_t>& distilled, Eigen::Index bins) {
  scalar_t lo = std::min(*std::min_element(ensemble.begin(), ensemble.end()),
                         *std::min_element(distilled.begin(), distilled.end()));
  scalar_t hi = std::max(*std::max_element(ensemble.begin(), ensemble.end()),
                         *std::max_element(distilled.begin(), distilled.end()));
  if (!(hi > lo)) hi = lo + 1;
  const scalar_t width = (hi - lo) / static_cast<scalar_t>(bins);
  auto counts = [&](const std::vector<scalar_t>& v) {
    std::vector<std::uint64_t> c(static_cast<std::size_t>(bins), 0);
    for (scalar_t x : v) {
      auto b = static_cast<Eigen::Index>((x - lo) / width);
      ++c[static_cast<std::size_t>(std::clamp<Eigen::Index>(b, 0, bins - 1))];
    }
    return c;
  };
  const auto ce = counts(ensemble), cd = counts(distilled);
  CsvWriter w(path, {"bin_lo", "bin_hi", "ensemble", "distilled"});
  for (Eigen::Index b = 0; b < bins; ++b) {
    const scalar_t blo = lo + width * static_cast<scalar_t>(b);
    w.cell(blo).cell(b == bins - 1 ? hi : blo + width);
    w.cell(ce[static_cast<std::size_t>(b)]).cell(cd[static_cast<std::size_t>(b)]);
    w.end();
  }
}

void write_per_x(const fs::path& path, const RegressionSet& data, const RegressionEvaluation& e,
                 const std::optional<Standardizer>& stats, bool decomposed) {
  const vector_t y = stats ? stats->inverse_y(data.y) : data.y;
  if (decomposed) {
    CsvWriter w(path, {"x", "y", "mean", "aleatoric", "epistemic", "total"});
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      const PointPrediction& p = e.points[static_cast<std::size_t>(i)];
      w.cell(data.x(i, 0)).cell(y(i)).cell(p.mean);
      w.cell(p.report->aleatoric).cell(p.report->epistemic).cell(p.total);
      w.end();
    }
  } else {
    CsvWriter w(path, {"x", "y", "mean", "total"});
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      const PointPrediction& p = e.points[static_cast<std::size_t>(i)];
      w.cell(data.x(i, 0)).cell(y(i)).cell(p.mean).cell(p.total);
      w.end();
    }
  }
}

std::pair<scalar_t, scalar_t> epistemic_far_near(const RegressionSet& data, const RegressionEvaluation& e) {
  scalar_t far = 0, near = 0;
  std::size_t nf = 0, nn = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const scalar_t ax = std::abs(data.x(i, 0));
    const scalar_t ep = e.points[static_cast<std::size_t>(i)].report->epistemic;
    if (ax >= 3.5 && ax <= 5) {
      far += ep;
      ++nf;
    } else if (ax <= 1) {
      near += ep;
      ++nn;
    }
  }
  if (nf == 0 || nn == 0) throw InputError("toy experiment: evaluation set misses |x| <= 1 or |x| in [3.5, 5]");
  return {far / static_cast<scalar_t>(nf), near / static_cast<scalar_t>(nn)};
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::toy_sine: return "toy-sine";
    case DatasetKind::blobs: return "blobs";
    case DatasetKind::csv: return "csv";
  }
  return "toy-sine";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "toy-sine") return DatasetKind::toy_sine;
  if (name == "blobs") return DatasetKind::blobs;
  if (name == "csv") return DatasetKind::csv;
  throw InputError("unknown dataset kind '" + std::string(name) + "'");
}

ExperimentConfig ExperimentConfig::defaults(DatasetKind kind) {
  ExperimentConfig c;
  c.dataset.kind = kind;
  switch (kind) {
    case DatasetKind::toy_sine:
      // Regression distillation uses the ensemble's constant learning rate.
      c.distill.lr_decay = 0;
      break;
    case DatasetKind::csv:
      c.ensemble.member_spec.hidden = {50};
      c.distill.distilled_spec.hidden = {75};
      c.distill.lr_decay = 0;
      break;
    case DatasetKind::blobs:
      c.distill.method = DistillMethod::dirichlet;
      c.distill.epochs = 100;
      c.evaluate.measure = UncertaintyMeasure::entropy;
      break;
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  const Section root(doc, "");
  root.allow({"dataset", "ensemble", "distill", "evaluate", "output_dir", "seed"});

  DatasetKind kind = DatasetKind::toy_sine;
  if (root.has("dataset")) {
    const Section ds(root.at("dataset"), "dataset");
    std::string k;
    ds.text("kind", k);
    if (!k.empty()) kind = parse_dataset_kind(k);
  }
  ExperimentConfig cfg = ExperimentConfig::defaults(kind);
  if (root.has("dataset")) read_dataset(Section(root.at("dataset"), "dataset"), cfg.dataset, base_dir);
  if (root.has("ensemble")) read_ensemble(Section(root.at("ensemble"), "ensemble"), cfg.ensemble);
  if (root.has("distill")) read_distill(Section(root.at("distill"), "distill"), cfg.distill);
  if (root.has("evaluate")) read_evaluate(Section(root.at("evaluate"), "evaluate"), cfg.evaluate);
  std::string out;
  root.text("output_dir", out);
  if (!out.empty()) cfg.output_dir = out;
  if (cfg.output_dir.is_relative()) cfg.output_dir = base_dir / cfg.output_dir;
  root.count("seed", cfg.seed, 0);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), fs::absolute(path).parent_path());
}

Task prepare_task(const ExperimentConfig& cfg) {
  const DatasetConfig& d = cfg.dataset;
  Task t;
  t.dataset_name = std::string(to_string(d.kind));
  switch (d.kind) {
    case DatasetKind::toy_sine:
      t.train_regression = toy_sine(d.n, d.x_lo, d.x_hi, cfg.data_seed(), d.noise);
      t.pool = uniform_pool(d.pool_n, d.pool_lo, d.pool_hi, cfg.pool_seed());
      t.eval_regression = toy_sine(std::max<Eigen::Index>(d.eval_n, 1), d.eval_lo, d.eval_hi, cfg.eval_seed(), d.noise);
      if (d.eval_n == 0) t.eval_regression = RegressionSet{matrix_t(0, 1), vector_t(0), "empty"};
      sort_by_x(*t.eval_regression);
      break;
    case DatasetKind::blobs: {
      const Eigen::Index k = d.centers.rows();
      t.train_classification = blobs_classification(d.n_per_class, d.centers, d.spread, cfg.data_seed());
      t.pool = blobs_classification(std::max<Eigen::Index>(1, d.pool_n / k), d.centers, d.spread, cfg.pool_seed()).x;
      t.eval_classification =
          blobs_classification(std::max<Eigen::Index>(1, d.eval_n / k), d.centers, d.spread, cfg.eval_seed());
      break;
    }
    case DatasetKind::csv: {
      const CsvTable table = read_csv(d.path);
      const FoldPlan plan = make_fold_plan(static_cast<std::size_t>(table.values.rows()), d.folds, cfg.data_seed());
      FoldData fold = std::move(load_csv_regression(table, d.target, plan).at(d.fold));
      t.dataset_name = d.path.stem().string();
      t.fold = d.fold;
      t.pool = fold.train.x;
      t.train_regression = std::move(fold.train);
      t.eval_regression = std::move(fold.test);
      t.stats = fold.stats;
      break;
    }
  }
  return t;
}

void write_log_csv(const fs::path& path, std::span<const TrainLogRow> log) {
  CsvWriter w(path, {"epoch", "member", "loss", "temperature"});
  for (const TrainLogRow& r : log) {
    w.cell(r.epoch).cell(static_cast<std::uint64_t>(r.member)).cell(r.loss).cell(r.temperature);
    w.end();
  }
}

void write_metrics_csv(const fs::path& path, std::span<const MetricsRow> rows, bool classification) {
  if (classification) {
    CsvWriter w(path, {"dataset", "fold", "model", "accuracy", "ece"});
    for (const MetricsRow& r : rows) {
      w.cell(r.dataset).cell(static_cast<std::uint64_t>(r.fold)).cell(r.model).cell(r.accuracy).cell(r.ece);
      w.end();
    }
  } else {
    CsvWriter w(path, {"dataset", "fold", "model", "rmse", "nll", "ause"});
    for (const MetricsRow& r : rows) {
      w.cell(r.dataset).cell(static_cast<std::uint64_t>(r.fold)).cell(r.model);
      w.cell(r.rmse).cell(r.nll).cell(r.ause);
      w.end();
    }
  }
}

EnsembleResult train_ensemble_stage(const ExperimentConfig& cfg, const Task& task, const fs::path& dir) {
  EnsembleConfig ec = cfg.ensemble;
  ec.base_seed = cfg.ensemble_seed();
  EnsembleResult r = task.train_classification ? train_ensemble(*task.train_classification, ec)
                                               : train_ensemble(*task.train_regression, ec);
  fs::create_directories(dir);
  for (std::size_t i = 0; i < r.members.size(); ++i)
    save_model(dir / member_file(r.member_indices[i]), r.members[i].to_record());
  write_log_csv(dir / "ensemble_log.csv", r.log);
  if (!r.failures.empty()) {
    std::string msg = "ensemble members diverged:";
    for (const MemberFailure& f : r.failures)
      msg += " member " + std::to_string(f.member) + " (epoch " + std::to_string(f.epoch) + ")";
    throw NumericalError(msg);
  }
  return r;
}

std::vector<TrainedModel> load_ensemble(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("ensemble directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("member_", 0) == 0 && entry.path().extension() == ".model") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no member_*.model files in " + dir.string());
  std::vector<TrainedModel> members;
  for (const fs::path& f : files) members.push_back(TrainedModel::from_record(load_model(f)));
  for (const TrainedModel& m : members)
    if (!(m.head == members.front().head)) throw InputError("ensemble members use different heads");
  return members;
}

DistillResult distill_stage(const ExperimentConfig& cfg, const Task& task, std::span<const TrainedModel> members,
                            const fs::path& dir) {
  DistillConfig dc = cfg.distill;
  dc.seed = cfg.distill_seed();
  const auto outputs = collect_ensemble_outputs(members, task.pool);
  std::optional<LabelledData> labelled;
  if (dc.lambda > 0) {
    if (task.train_regression) {
      labelled = LabelledData{task.train_regression->x, task.train_regression->y};
    } else {
      const ClassificationSet& c = *task.train_classification;
      matrix_t y(c.size(), 1);
      for (Eigen::Index i = 0; i < c.size(); ++i) y(i, 0) = static_cast<scalar_t>(c.labels[static_cast<std::size_t>(i)]);
      labelled = LabelledData{c.x, y};
    }
  }
  DistillResult r = distill(outputs, task.pool, dc, labelled);
  fs::create_directories(dir);
  const std::string slug = method_slug(dc.method);
  save_model(dir / ("distilled_" + slug + ".model"), r.model.to_record());
  write_log_csv(dir / ("distill_" + slug + "_log.csv"), r.log);
  return r;
}

MetricsRow evaluate_artifact(const ExperimentConfig& cfg, const Task& task, const fs::path& artifact) {
  const EvalOptions opts = eval_options(cfg, task);
  if (fs::is_directory(artifact)) {
    const auto members = load_ensemble(artifact);
    if (task.eval_classification)
      return row_for(task, "ensemble", evaluate(std::span<const TrainedModel>(members), *task.eval_classification, opts));
    return row_for(task, "ensemble", evaluate(std::span<const TrainedModel>(members), *task.eval_regression, opts));
  }
  if (!fs::exists(artifact)) throw InputError("model not found: " + artifact.string());
  const ModelRecord record = load_model(artifact);
  if (record.head_tag == "gaussian" || record.head_tag == "categorical") {
    const std::vector<TrainedModel> single{TrainedModel::from_record(record)};
    if (task.eval_classification)
      return row_for(task, "member", evaluate(std::span<const TrainedModel>(single), *task.eval_classification, opts));
    return row_for(task, "member", evaluate(std::span<const TrainedModel>(single), *task.eval_regression, opts));
  }
  const DistilledModel model = DistilledModel::from_record(record);
  const std::string name(to_string(model.method));
  if (task.eval_classification) return row_for(task, name, evaluate(model, *task.eval_classification, opts));
  return row_for(task, name, evaluate(model, *task.eval_regression, opts));
}

ToySummary run_toy_experiment(const ExperimentConfig& base) {
  if (base.dataset.kind != DatasetKind::toy_sine) throw InputError("toy experiment needs the toy-sine dataset");
  if (base.evaluate.measure != UncertaintyMeasure::variance &&
      base.evaluate.measure != UncertaintyMeasure::differential_entropy)
    throw InputError("toy experiment: measure must be variance or differential-entropy");
  const fs::path out = base.output_dir;
  const Task task = prepare_task(base);
  const EnsembleResult ens = train_ensemble_stage(base, task, out / "ensemble");
  const std::span<const TrainedModel> members(ens.members);

  ExperimentConfig gz = base;
  gz.distill.method = DistillMethod::gaussian_over_z;
  const DistillResult dz = distill_stage(gz, task, members, out);
  ExperimentConfig mx = base;
  mx.distill.method = DistillMethod::mixture;
  const DistillResult dm = distill_stage(mx, task, members, out);

  const RegressionSet& eval = *task.eval_regression;
  const EvalOptions opts = eval_options(base, task);
  const RegressionEvaluation e_ens = evaluate(members, eval, opts);
  const RegressionEvaluation e_gz = evaluate(dz.model, eval, opts);
  const RegressionEvaluation e_mx = evaluate(dm.model, eval, opts);

  write_per_x(out / "toy_ensemble.csv", eval, e_ens, task.stats, true);
  write_per_x(out / "toy_gaussian_over_z.csv", eval, e_gz, task.stats, true);
  write_per_x(out / "toy_mixture.csv", eval, e_mx, task.stats, false);
  write_sparsification(out / "sparsification_ensemble.csv", e_ens.curves);
  write_sparsification(out / "sparsification_gaussian_over_z.csv", e_gz.curves);
  write_sparsification(out / "sparsification_mixture.csv", e_mx.curves);

  // Parameter-space comparison over the distillation pool.
  std::vector<scalar_t> ens_mean, ens_var, dist_mean, dist_var;
  if (members.size() >= 2) {
    const auto outputs = collect_ensemble_outputs(members, task.pool);
    const matrix_t raw = dz.model.raw(task.pool);
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const auto [m, v] = ensemble_logit_moments(outputs[i]);
      const DiagGaussianOverZ q = dz.model.z_distribution(raw.row(static_cast<Eigen::Index>(i)).transpose());
      // One value per input: the average over parameter coordinates.
      ens_mean.push_back(m.mean());
      ens_var.push_back(v.mean());
      dist_mean.push_back(q.mu.mean());
      dist_var.push_back(q.var_diag.mean());
    }
    write_histogram(out / "histogram_mean.csv", ens_mean, dist_mean, base.evaluate.histogram_bins);
    write_histogram(out / "histogram_variance.csv", ens_var, dist_var, base.evaluate.histogram_bins);
  }

  ToySummary s;
  s.metrics = {row_for(task, "ensemble", e_ens), row_for(task, "gaussian-over-z", e_gz),
               row_for(task, "mixture", e_mx)};
  write_metrics_csv(out / "metrics.csv", s.metrics, false);
  std::tie(s.distilled_epistemic_far, s.distilled_epistemic_near) = epistemic_far_near(eval, e_gz);
  std::tie(s.ensemble_epistemic_far, s.ensemble_epistemic_near) = epistemic_far_near(eval, e_ens);
  return s;
}

std::vector<MetricsRow> run_fold_experiment(const ExperimentConfig& base) {
  if (base.dataset.kind != DatasetKind::csv) throw InputError("fold experiment needs a csv dataset");
  std::vector<MetricsRow> rows;
  for (std::size_t k = 0; k < base.dataset.folds; ++k) {
    ExperimentConfig cfg = base;
    cfg.dataset.fold = k;
    const Task task = prepare_task(cfg);
    const fs::path dir = base.output_dir / ("fold_" + std::to_string(k));
    const EnsembleResult ens = train_ensemble_stage(cfg, task, dir / "ensemble");
    const std::span<const TrainedModel> members(ens.members);
    const EvalOptions opts = eval_options(cfg, task);
    rows.push_back(row_for(task, "ensemble", evaluate(members, *task.eval_regression, opts)));
    for (DistillMethod m : {DistillMethod::mixture, DistillMethod::gaussian_over_z}) {
      cfg.distill.method = m;
      const DistillResult d = distill_stage(cfg, task, members, dir);
      rows.push_back(row_for(task, std::string(to_string(m)), evaluate(d.model, *task.eval_regression, opts)));
    }
  }
  write_metrics_csv(base.output_dir / "metrics.csv", rows, false);
  return rows;
}

}  // namespace edd
