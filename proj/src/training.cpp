// SPDX-License-Identifier: Apache-2.0
#include "tgcn/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "tgcn/errors.hpp"

namespace tgcn {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be a finite value >= 0");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (eval_every == 0) throw ConfigError("eval_every must be >= 1");
  if (!(clip >= 0.0)) throw ConfigError("clip must be >= 0");
  if (eval_threads == 0) throw ConfigError("eval_threads must be >= 1");
}

ad::Tensor loss(const ad::Tensor& pred, const ad::Tensor& truth,
                const std::vector<NamedParameter>& params, double lambda) {
  if (pred.shape() != truth.shape()) {
    throw ShapeError("loss: prediction " + ad::to_string(pred.shape()) + " vs truth " +
                     ad::to_string(truth.shape()));
  }
  ad::Tensor residual = ad::sub(pred, truth);
  ad::Tensor total = ad::mean(ad::hadamard(residual, residual));
  if (lambda > 0.0) {
    for (const auto& p : params) {
      if (p.is_weight) total = ad::add(total, ad::scale(ad::sum_squares(p.value), lambda));
    }
  }
  return total;
}

AdamState AdamState::for_parameters(const std::vector<NamedParameter>& params) {
  AdamState s;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.value.numel(), 0.0);
    s.second_moment.emplace_back(p.value.numel(), 0.0);
  }
  return s;
}

void adam_step(std::vector<NamedParameter>& params, AdamState& state, double lr) {
  if (state.first_moment.size() != params.size()) {
    throw ContractError("Adam state holds " + std::to_string(state.first_moment.size()) +
                        " moments for " + std::to_string(params.size()) + " parameters");
  }
  for (const auto& p : params) {
    if (!p.value.has_grad()) continue;
    for (double g : p.value.grad())
      if (!std::isfinite(g)) throw TrainingDiverged("non-finite gradient in parameter '" + p.name + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].value;
    auto value = p.data();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    const bool has = p.has_grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = has ? p.grad()[i] : 0.0;
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double clip_grad_norm(std::vector<NamedParameter>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.value.has_grad())
      for (double g : p.value.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& p : params)
      if (p.value.has_grad())
        for (double& g : p.value.mutable_grad()) g *= factor;
  }
  return norm;
}

namespace {

ad::Tensor stack_targets(const WindowSet& set, std::span<const std::size_t> idx) {
  const auto n = static_cast<std::size_t>(set.targets.front().rows());
  const std::size_t h = set.horizon;
  ad::Buffer values(idx.size() * n * h);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& y = set.targets[idx[b]];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < h; ++k)
        values[(b * n + i) * h + k] = y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  }
  return ad::Tensor::from(idx.size() * n, h, std::move(values));
}

std::vector<const Eigen::MatrixXd*> gather_inputs(const WindowSet& set,
                                                  std::span<const std::size_t> idx) {
  std::vector<const Eigen::MatrixXd*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&set.inputs[i]);
  return out;
}

void zero_grads(std::vector<NamedParameter>& params) {
  for (auto& p : params) p.value.zero_grad();
}

}  // namespace

Evaluation evaluate(const SequenceModel& model, const WindowSet& windows,
                    const MinMaxScaler& scaler, std::size_t batch_size, std::size_t threads) {
  if (windows.empty()) throw DataError("no windows to evaluate");
  const std::size_t n = model.config().n_nodes;
  const std::size_t h = windows.horizon;
  if (h != model.config().horizon) {
    throw ShapeError("windows have horizon " + std::to_string(h) + ", model has " +
                     std::to_string(model.config().horizon));
  }
  const std::size_t count = windows.size();
  Eigen::MatrixXd pred(static_cast<Eigen::Index>(count * n), static_cast<Eigen::Index>(h));
  Eigen::MatrixXd truth(pred.rows(), pred.cols());
  for (std::size_t w = 0; w < count; ++w)
    truth.middleRows(static_cast<Eigen::Index>(w * n), static_cast<Eigen::Index>(n)) = windows.targets[w];

  batch_size = std::max<std::size_t>(batch_size, 1);
  const std::size_t n_batches = (count + batch_size - 1) / batch_size;
  auto run = [&](std::size_t first_batch, std::size_t stride) {
    ad::NoGradGuard no_grad;
    for (std::size_t b = first_batch; b < n_batches; b += stride) {
      const std::size_t lo = b * batch_size;
      const std::size_t hi = std::min(count, lo + batch_size);
      std::vector<const Eigen::MatrixXd*> inputs;
      for (std::size_t w = lo; w < hi; ++w) inputs.push_back(&windows.inputs[w]);
      Eigen::MatrixXd out = model.forward_batch(inputs).to_eigen();
      pred.middleRows(static_cast<Eigen::Index>(lo * n), out.rows()) = out;
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, n_batches);
  if (threads == 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) workers.emplace_back(run, t, threads);
  }

  Evaluation result;
  result.truth = scaler.denormalize(truth);
  result.pred = scaler.denormalize(pred);
  result.metrics = compute_metrics(result.truth, result.pred);
  return result;
}

TrainResult train(SequenceModel model, const WindowSplit& windows, const MinMaxScaler& scaler,
                  const TrainConfig& config, const EpochCallback& on_eval) {
  config.validate();
  if (windows.train.empty()) throw DataError("no training windows");
  if (windows.test.empty()) throw DataError("no test windows");

  auto& params = model.parameters();
  AdamState adam = AdamState::for_parameters(params);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(windows.train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{model.clone(), model.clone(), 0, {}, {}, {}};
  double best_rmse = std::numeric_limits<double>::infinity();
  const bool trainable = !params.empty();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + config.batch_size);
      std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      auto inputs = gather_inputs(windows.train, idx);
      ad::Tensor pred = model.forward_batch(inputs);
      ad::Tensor batch_loss = loss(pred, stack_targets(windows.train, idx), params, config.lambda);
      loss_sum += batch_loss.item() * static_cast<double>(idx.size());
      if (!trainable) continue;
      zero_grads(params);
      ad::backward(batch_loss);
      if (config.clip > 0.0) clip_grad_norm(params, config.clip);
      try {
        adam_step(params, adam, config.lr);
      } catch (const TrainingDiverged& e) {
        throw TrainingDiverged(std::string(e.what()) + " at epoch " + std::to_string(epoch));
      }
    }

    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      HistoryRow row;
      row.epoch = epoch;
      row.train_loss = loss_sum / static_cast<double>(order.size());
      row.metrics = evaluate(model, windows.test, scaler, config.batch_size, config.eval_threads).metrics;
      if (row.metrics.rmse < best_rmse) {
        best_rmse = row.metrics.rmse;
        result.best = model.clone();
        result.best_epoch = epoch;
        result.best_metrics = row.metrics;
      }
      result.history.push_back(row);
      if (on_eval) on_eval(row);
    }
  }
  zero_grads(params);
  result.final_metrics = result.history.back().metrics;
  result.final_model = model.clone();
  return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history to " + path.string());
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream os;
    os << std::setprecision(17);
    if (v) os << *v; else os << "nan";
    return os.str();
  };
  out << "epoch,train_loss,rmse,mae,accuracy,r2,var\n" << std::setprecision(17);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.metrics.rmse << ',' << r.metrics.mae << ','
        << opt(r.metrics.accuracy) << ',' << opt(r.metrics.r2) << ',' << opt(r.metrics.var) << '\n';
  }
}

}  // namespace tgcn
