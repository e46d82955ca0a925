// Command-line front end. Exit codes: 0 ok, 2 usage or config error,
// 3 numerical failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "edd/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kNumerical = 3;

struct Common {
  std::string config;
  std::string out;
  std::optional<edd::seed_t> seed;
  std::optional<Eigen::Index> samples;
  std::string measure;
  std::string method;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config, "Experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", c.out, "Output directory (evaluate: metrics CSV path)");
  cmd->add_option("--seed", c.seed, "Experiment seed");
  cmd->add_option("--samples", c.samples, "z draws for distilled models")->check(CLI::PositiveNumber);
  cmd->add_option("--measure", c.measure, "variance, entropy or differential-entropy");
  cmd->add_option("--method", c.method, "mixture, gaussian-over-z or dirichlet");
}

edd::ExperimentConfig resolve(const Common& c) {
  edd::ExperimentConfig cfg = c.config.empty() ? edd::ExperimentConfig::defaults(edd::DatasetKind::toy_sine)
                                               : edd::load_config(c.config);
  if (c.config.empty()) cfg.output_dir = fs::absolute(cfg.output_dir);
  if (!c.out.empty()) cfg.output_dir = fs::absolute(c.out);
  if (c.seed) cfg.seed = *c.seed;
  if (c.samples) cfg.evaluate.samples = *c.samples;
  if (!c.measure.empty()) cfg.evaluate.measure = edd::parse_measure(c.measure);
  if (!c.method.empty()) cfg.distill.method = edd::parse_distill_method(c.method);
  if (const char* threads = std::getenv("EDD_THREADS")) {
    try {
      cfg.ensemble.threads = static_cast<std::size_t>(std::stoul(threads));
    } catch (const std::exception&) {
      throw edd::InputError("EDD_THREADS must be a non-negative integer");
    }
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble distribution distillation"};
  app.require_subcommand(1);

  Common train_opts, distill_opts, toy_opts, eval_opts, fold_opts;
  std::string ensemble_dir, model_path;

  auto* train = app.add_subcommand("train-ensemble", "Train an ensemble; writes <out>/ensemble");
  add_common(train, train_opts, true);

  auto* dist = app.add_subcommand("distill", "Distill a trained ensemble into one model");
  add_common(dist, distill_opts, true);
  dist->add_option("--ensemble", ensemble_dir, "Directory of member_*.model files")->required();

  auto* toy = app.add_subcommand("toy-experiment", "Full toy-sinusoid pipeline with CSV reports");
  add_common(toy, toy_opts, false);

  auto* eval = app.add_subcommand("evaluate", "Evaluate an ensemble directory or a model file");
  add_common(eval, eval_opts, true);
  eval->add_option("--model", model_path, "Ensemble directory or model file")->required();

  auto* folds = app.add_subcommand("fold-experiment", "Every fold of a csv dataset");
  add_common(folds, fold_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train->parsed()) {
      const auto cfg = resolve(train_opts);
      const auto task = edd::prepare_task(cfg);
      const auto r = edd::train_ensemble_stage(cfg, task, cfg.output_dir / "ensemble");
      std::cout << "trained " << r.members.size() << " members into " << (cfg.output_dir / "ensemble").string()
                << '\n';
    } else if (dist->parsed()) {
      const auto cfg = resolve(distill_opts);
      const auto task = edd::prepare_task(cfg);
      const auto members = edd::load_ensemble(ensemble_dir);
      edd::distill_stage(cfg, task, members, cfg.output_dir);
      std::cout << "distilled " << edd::to_string(cfg.distill.method) << " model into "
                << cfg.output_dir.string() << '\n';
    } else if (toy->parsed()) {
      const auto cfg = resolve(toy_opts);
      const auto s = edd::run_toy_experiment(cfg);
      std::cout << "toy experiment written to " << cfg.output_dir.string() << '\n'
                << "gaussian-over-z mean epistemic variance: |x| in [3.5, 5] " << s.distilled_epistemic_far
                << ", |x| <= 1 " << s.distilled_epistemic_near << '\n';
    } else if (eval->parsed()) {
      const auto cfg = resolve(eval_opts);
      const auto task = edd::prepare_task(cfg);
      const edd::MetricsRow row = edd::evaluate_artifact(cfg, task, model_path);
      const fs::path out = eval_opts.out.empty() ? cfg.output_dir / "metrics.csv" : fs::path(eval_opts.out);
      edd::write_metrics_csv(out, std::span<const edd::MetricsRow>(&row, 1), task.eval_classification.has_value());
      std::cout << "metrics written to " << out.string() << '\n';
    } else if (folds->parsed()) {
      const auto cfg = resolve(fold_opts);
      const auto rows = edd::run_fold_experiment(cfg);
      std::cout << rows.size() << " metrics rows written to " << (cfg.output_dir / "metrics.csv").string() << '\n';
    }
  } catch (const edd::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kOk;
}
