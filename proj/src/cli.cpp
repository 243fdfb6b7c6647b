// SPDX-License-Identifier: Apache-2.0
#include "tgcn/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tgcn/checkpoint.hpp"
#include "tgcn/data.hpp"
#include "tgcn/errors.hpp"
#include "tgcn/gradcheck.hpp"
#include "tgcn/graph.hpp"
#include "tgcn/metrics.hpp"
#include "tgcn/models.hpp"
#include "tgcn/training.hpp"

namespace tgcn::cli {
namespace {

namespace fs = std::filesystem;

/// Gaussian sigma and Poisson lambda values swept by `perturb --sweep`.
const std::vector<double> kGaussianSweep{0.2, 0.4, 0.8, 1.0, 2.0};
const std::vector<double> kPoissonSweep{1.0, 2.0, 4.0, 8.0, 16.0};

struct RunSpec {
  std::string command;
  std::string adj;
  std::string features;
  std::string dataset_name;
  std::string model = "tgcn";
  std::size_t hidden = 100;
  std::size_t seq_len = 12;
  std::size_t horizon_steps = 1;
  double lr = 1e-3;
  std::size_t batch = 64;
  std::size_t epochs = 3000;
  double lambda = 1.5e-3;
  double clip = 5.0;
  std::uint64_t seed = 0;
  std::size_t eval_every = 10;
  int interval = 15;
  bool transpose = false;
  bool missing_zero = false;
  std::string out;
  std::string checkpoint;
  std::string metrics_out;
  std::string history_out;
  std::string predictions_out;
  std::string dist = "gaussian";
  double param = 0.0;
  bool sweep = false;
  bool quiet = false;
  std::size_t threads = 1;
};

std::size_t threads_from_env() {
  if (const char* v = std::getenv("TGCN_THREADS")) {
    try {
      const long n = std::stol(v);
      if (n >= 1) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

struct Prepared {
  RoadNetwork network;
  TimeSeriesDataset dataset;
  WindowSplit windows;
};

Prepared prepare(const RunSpec& spec, const std::optional<Perturbation>& noise) {
  RoadNetwork network = load_adjacency(spec.adj);
  TimeSeriesDataset ds = load_features(spec.features, static_cast<std::size_t>(network.n_nodes()),
                                       spec.transpose, spec.interval);
  ds = interpolate_missing(std::move(ds), spec.missing_zero ? std::optional<double>(0.0) : std::nullopt);
  ds = normalize(std::move(ds));
  if (noise) ds = add_noise(std::move(ds), parse_noise_dist(noise->dist), noise->param, noise->seed);
  WindowSplit windows = make_windows(ds, spec.seq_len, spec.horizon_steps);
  if (windows.test.empty())
    throw DataError("horizon " + std::to_string(spec.horizon_steps) + " leaves no test windows");
  return {std::move(network), std::move(ds), std::move(windows)};
}

TrainConfig train_config(const RunSpec& spec) {
  TrainConfig c;
  c.lr = spec.lr;
  c.batch_size = spec.batch;
  c.epochs = spec.epochs;
  c.lambda = spec.lambda;
  c.seed = spec.seed;
  c.eval_every = spec.eval_every;
  c.clip = spec.clip;
  c.eval_threads = spec.threads;
  c.validate();
  return c;
}

ModelConfig model_config(const RunSpec& spec, const RoadNetwork& network) {
  ModelConfig c;
  c.kind = parse_model_kind(spec.model);
  c.n_nodes = static_cast<std::size_t>(network.n_nodes());
  c.hidden = spec.hidden;
  c.seq_len = spec.seq_len;
  c.horizon = spec.horizon_steps;
  return c;
}

std::string dataset_name(const RunSpec& spec) {
  return spec.dataset_name.empty() ? fs::path(spec.features).stem().string() : spec.dataset_name;
}

void write_json(const std::string& path, const nlohmann::ordered_json& j, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path);
  f << text;
}

/// "<dir>/<stem><suffix>" for a path like "<dir>/<stem>.<ext>".
std::string with_suffix(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

void write_predictions(const std::string& path, const Evaluation& eval, std::size_t n_nodes,
                       std::size_t horizon) {
  // One row per (test window, horizon step); one column per node.
  const std::size_t windows = static_cast<std::size_t>(eval.pred.rows()) / n_nodes;
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << std::setprecision(17);
  for (std::size_t w = 0; w < windows; ++w)
    for (std::size_t k = 0; k < horizon; ++k) {
      for (std::size_t i = 0; i < n_nodes; ++i) {
        if (i) f << ',';
        f << eval.pred(static_cast<Eigen::Index>(w * n_nodes + i), static_cast<Eigen::Index>(k));
      }
      f << '\n';
    }
}

struct RunOutcome {
  MetricsReport best;
  MetricsReport final_metrics;
};

RunOutcome train_and_report(const RunSpec& spec, const std::optional<Perturbation>& noise,
                            const std::string& metrics_path, std::ostream& out, std::ostream& err) {
  Prepared prep = prepare(spec, noise);
  const ModelConfig mc = model_config(spec, prep.network);
  const MinMaxScaler& scaler = *prep.dataset.scaler;
  const std::string name = dataset_name(spec);

  if (mc.kind == ModelKind::ha) {
    SequenceModel model(mc, prep.network);
    Evaluation eval = evaluate(model, prep.windows.test, scaler, spec.batch, spec.threads);
    write_json(metrics_path, metrics_json(eval.metrics, spec.model, name, spec.horizon_steps, noise), out);
    if (!spec.out.empty()) save_checkpoint(model, spec.out);
    if (!spec.predictions_out.empty())
      write_predictions(spec.predictions_out, eval, mc.n_nodes, mc.horizon);
    return {eval.metrics, eval.metrics};
  }

  const TrainConfig tc = train_config(spec);
  SequenceModel model(mc, prep.network);
  init_parameters(model, spec.seed);
  EpochCallback progress;
  if (!spec.quiet) {
    progress = [&err](const HistoryRow& row) {
      err << "epoch " << row.epoch << " loss " << row.train_loss << " rmse " << row.metrics.rmse
          << '\n';
    };
  }
  TrainResult result = train(std::move(model), prep.windows, scaler, tc, progress);

  if (!spec.out.empty()) {
    save_checkpoint(result.best, spec.out);
    save_checkpoint(result.final_model, spec.out + ".final");
  }
  if (!spec.history_out.empty()) write_history_csv(spec.history_out, result.history);
  write_json(metrics_path, metrics_json(result.best_metrics, spec.model, name, spec.horizon_steps, noise), out);
  if (!metrics_path.empty()) {
    write_json(with_suffix(metrics_path, ".final.json"),
               metrics_json(result.final_metrics, spec.model, name, spec.horizon_steps, noise), out);
  }
  if (!spec.predictions_out.empty()) {
    Evaluation eval = evaluate(result.best, prep.windows.test, scaler, spec.batch, spec.threads);
    write_predictions(spec.predictions_out, eval, mc.n_nodes, mc.horizon);
  }
  return {result.best_metrics, result.final_metrics};
}

int cmd_train(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  train_and_report(spec, std::nullopt, spec.metrics_out, out, err);
  return 0;
}

int cmd_eval(RunSpec spec, const CLI::App& sub, bool write_metrics, std::ostream& out) {
  if (spec.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  RoadNetwork network = load_adjacency(spec.adj);
  SequenceModel model = load_checkpoint(spec.checkpoint, network);
  const auto& c = model.config();
  if (sub.count("--horizon-steps") && spec.horizon_steps != c.horizon)
    throw CheckpointError("checkpoint horizon " + std::to_string(c.horizon) +
                          " differs from --horizon-steps " + std::to_string(spec.horizon_steps));
  if (sub.count("--seq-len") && spec.seq_len != c.seq_len)
    throw CheckpointError("checkpoint seq_len " + std::to_string(c.seq_len) +
                          " differs from --seq-len " + std::to_string(spec.seq_len));
  if (sub.count("--hidden") && spec.hidden != c.hidden)
    throw CheckpointError("checkpoint hidden " + std::to_string(c.hidden) + " differs from --hidden " +
                          std::to_string(spec.hidden));
  spec.horizon_steps = c.horizon;
  spec.seq_len = c.seq_len;
  spec.model = std::string(to_string(c.kind));

  Prepared prep = prepare(spec, std::nullopt);
  Evaluation eval = evaluate(model, prep.windows.test, *prep.dataset.scaler, spec.batch, spec.threads);
  if (write_metrics)
    write_json(spec.metrics_out, metrics_json(eval.metrics, spec.model, dataset_name(spec), c.horizon), out);
  if (!spec.predictions_out.empty()) write_predictions(spec.predictions_out, eval, c.n_nodes, c.horizon);
  return 0;
}

std::string param_label(double p) {
  std::ostringstream os;
  os << p;
  return os.str();
}

int cmd_perturb(const RunSpec& spec, std::ostream& out, std::ostream& err) {
  const NoiseDist dist = parse_noise_dist(spec.dist);
  if (!spec.sweep) {
    if (!(spec.param > 0.0)) throw ConfigError("--param must be positive");
    train_and_report(spec, Perturbation{spec.dist, spec.param, spec.seed}, spec.metrics_out, out, err);
    return 0;
  }

  const auto& params = dist == NoiseDist::gaussian ? kGaussianSweep : kPoissonSweep;
  const std::string base = spec.metrics_out.empty() ? "perturb.json" : spec.metrics_out;
  const std::string csv_path = with_suffix(base, "_sweep.csv");
  std::ofstream csv(csv_path);
  if (!csv) throw DataError("cannot write " + csv_path);
  csv << (dist == NoiseDist::gaussian ? "sigma" : "lambda") << ",rmse,mae,accuracy,r2,var\n"
      << std::setprecision(17);
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream os;
    os << std::setprecision(17);
    if (v) os << *v; else os << "nan";
    return os.str();
  };
  for (double p : params) {
    RunSpec run = spec;
    run.out = spec.out.empty() ? std::string{} : with_suffix(spec.out, "_" + spec.dist + "_" + param_label(p) + ".ckpt");
    run.history_out = spec.history_out.empty() ? std::string{}
                                               : with_suffix(spec.history_out, "_" + spec.dist + "_" + param_label(p) + ".csv");
    run.predictions_out.clear();
    const std::string path = with_suffix(base, "_" + spec.dist + "_" + param_label(p) + ".json");
    RunOutcome r = train_and_report(run, Perturbation{spec.dist, p, spec.seed}, path, out, err);
    csv << p << ',' << r.best.rmse << ',' << r.best.mae << ',' << opt(r.best.accuracy) << ','
        << opt(r.best.r2) << ',' << opt(r.best.var) << '\n';
  }
  return 0;
}

int cmd_gradcheck(const RunSpec& spec, std::ostream& out) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::optional<RoadNetwork> network;
  if (!spec.adj.empty()) {
    network.emplace(load_adjacency(spec.adj));
  } else {
    const Eigen::Index n = 4;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        if (unit(rng) < 0.5) a(i, j) = a(j, i) = 1.0;
    network.emplace(std::move(a));
  }
  ModelConfig mc;
  mc.kind = parse_model_kind(spec.model);
  if (mc.kind == ModelKind::ha) throw ConfigError("the ha model has no parameters to check");
  mc.n_nodes = static_cast<std::size_t>(network->n_nodes());
  mc.hidden = spec.hidden;
  mc.seq_len = spec.seq_len;
  mc.horizon = spec.horizon_steps;
  SequenceModel model(mc, *network);
  init_parameters(model, spec.seed);

  Eigen::MatrixXd window = Eigen::MatrixXd::NullaryExpr(
      static_cast<Eigen::Index>(mc.seq_len), network->n_nodes(), [&] { return unit(rng); });
  Eigen::MatrixXd target = Eigen::MatrixXd::NullaryExpr(
      network->n_nodes(), static_cast<Eigen::Index>(mc.horizon), [&] { return unit(rng); });
  ad::Tensor w = ad::Tensor::from(window);
  ad::Tensor y = ad::Tensor::from(target);

  std::vector<ad::Tensor> inputs;
  std::vector<std::string> names;
  for (const auto& p : model.parameters()) {
    inputs.push_back(p.value);
    names.push_back(p.name);
  }
  ad::GradcheckOptions opts;
  auto report = ad::gradcheck([&] { return loss(model.forward(w), y, model.parameters(), spec.lambda); },
                              inputs, opts, names);
  nlohmann::ordered_json j;
  j["model"] = spec.model;
  j["tolerance"] = report.tolerance;
  j["passed"] = report.passed;
  j["max_rel_error"] = report.max_rel_error();
  for (const auto& e : report.inputs)
    j["parameters"].push_back({{"name", e.name}, {"max_rel_error", e.max_rel_error}, {"max_abs_error", e.max_abs_error}});
  out << j.dump(2) << '\n';
  return report.passed ? 0 : 1;
}

void add_data_options(CLI::App& sub, RunSpec& spec, bool require_data) {
  auto* adj = sub.add_option("--adj", spec.adj, "Adjacency CSV (n x n, no header)");
  auto* feat = sub.add_option("--features", spec.features, "Feature CSV (rows = timesteps, no header)");
  if (require_data) {
    adj->required();
    feat->required();
  }
  sub.add_option("--dataset-name", spec.dataset_name, "Name recorded in the metrics JSON");
  sub.add_option("--interval", spec.interval, "Sampling interval in minutes");
  sub.add_flag("--transpose", spec.transpose, "Feature CSV has rows = nodes");
  sub.add_flag("--missing-zero", spec.missing_zero, "Treat zero readings as missing and interpolate");
}

void add_model_options(CLI::App& sub, RunSpec& spec) {
  sub.add_option("--model", spec.model, "tgcn, gcn, gru or ha")
      ->check(CLI::IsMember({"tgcn", "gcn", "gru", "ha"}));
  sub.add_option("--hidden", spec.hidden, "Hidden units")->check(CLI::PositiveNumber);
  sub.add_option("--seq-len", spec.seq_len, "Input window length")->check(CLI::PositiveNumber);
  sub.add_option("--horizon-steps", spec.horizon_steps, "Predicted steps")->check(CLI::PositiveNumber);
  sub.add_option("--seed", spec.seed, "Random seed");
  sub.add_option("--batch", spec.batch, "Batch size (windows)")->check(CLI::PositiveNumber);
}

void add_train_options(CLI::App& sub, RunSpec& spec) {
  sub.add_option("--lr", spec.lr, "Adam learning rate");
  sub.add_option("--epochs", spec.epochs, "Training epochs")->check(CLI::PositiveNumber);
  sub.add_option("--lambda", spec.lambda, "L2 coefficient on weights");
  sub.add_option("--clip", spec.clip, "Global gradient-norm clip (0 disables)");
  sub.add_option("--eval-every", spec.eval_every, "Epochs between test evaluations")->check(CLI::PositiveNumber);
  sub.add_option("--out", spec.out, "Checkpoint path (best model; final model at PATH.final)");
  sub.add_option("--history-out", spec.history_out, "History CSV path");
  sub.add_flag("--quiet", spec.quiet, "No progress output");
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j{{"error", kind}, {"message", message}};
  err << j.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"T-GCN traffic forecasting: training, evaluation and perturbation experiments", "tgcn"};
  app.require_subcommand(1);
  RunSpec spec;
  spec.threads = threads_from_env();

  auto* train_cmd = app.add_subcommand("train", "Train a model and report test metrics");
  add_data_options(*train_cmd, spec, true);
  add_model_options(*train_cmd, spec);
  add_train_options(*train_cmd, spec);
  train_cmd->add_option("--metrics-out", spec.metrics_out, "Metrics JSON path (stdout if omitted)");
  train_cmd->add_option("--predictions-out", spec.predictions_out, "Test predictions CSV");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_data_options(*eval_cmd, spec, true);
  add_model_options(*eval_cmd, spec);
  eval_cmd->add_option("--checkpoint", spec.checkpoint, "Checkpoint to evaluate")->required();
  eval_cmd->add_option("--metrics-out", spec.metrics_out, "Metrics JSON path (stdout if omitted)");
  eval_cmd->add_option("--predictions-out", spec.predictions_out, "Test predictions CSV");

  auto* predict_cmd = app.add_subcommand("predict", "Write test-split predictions of a checkpoint");
  add_data_options(*predict_cmd, spec, true);
  add_model_options(*predict_cmd, spec);
  predict_cmd->add_option("--checkpoint", spec.checkpoint, "Checkpoint to run")->required();
  predict_cmd->add_option("--predictions-out,--out", spec.predictions_out, "Predictions CSV")->required();

  auto* perturb_cmd = app.add_subcommand("perturb", "Train and evaluate on noise-injected data");
  add_data_options(*perturb_cmd, spec, true);
  add_model_options(*perturb_cmd, spec);
  add_train_options(*perturb_cmd, spec);
  perturb_cmd->add_option("--metrics-out", spec.metrics_out, "Metrics JSON path");
  perturb_cmd->add_option("--dist", spec.dist, "gaussian or poisson")
      ->check(CLI::IsMember({"gaussian", "poisson"}));
  perturb_cmd->add_option("--param", spec.param, "Gaussian sigma or Poisson lambda");
  perturb_cmd->add_flag("--sweep", spec.sweep, "Run every sigma/lambda setting and write a combined CSV");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of model gradients");
  grad_cmd->add_option("--adj", spec.adj, "Adjacency CSV (default: random 4-node graph)");
  add_model_options(*grad_cmd, spec);
  grad_cmd->add_option("--lambda", spec.lambda, "L2 coefficient on weights");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*train_cmd) return cmd_train(spec, out, err);
    if (*eval_cmd) return cmd_eval(spec, *eval_cmd, true, out);
    if (*predict_cmd) return cmd_eval(spec, *predict_cmd, false, out);
    if (*perturb_cmd) {
      if (!spec.sweep && !perturb_cmd->count("--param"))
        throw ConfigError("--param is required unless --sweep is given");
      return cmd_perturb(spec, out, err);
    }
    if (*grad_cmd) {
      if (!grad_cmd->count("--hidden")) spec.hidden = 5;
      if (!grad_cmd->count("--seq-len")) spec.seq_len = 3;
      return cmd_gradcheck(spec, out);
    }
  } catch (const Error& e) {
    report_error(err, e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error(err, "InternalError", e.what());
    return 1;
  }
  return 2;
}

}  // namespace tgcn::cli
