// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "tgcn/autodiff.hpp"
#include "tgcn/data.hpp"
#include "tgcn/metrics.hpp"
#include "tgcn/models.hpp"

namespace tgcn {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 3000;
  double lambda = 1.5e-3;
  std::uint64_t seed = 0;
  std::size_t eval_every = 10;
  /// Global gradient-norm clip; 0 disables clipping.
  double clip = 5.0;
  /// Worker threads for evaluation only; training is single-threaded.
  std::size_t eval_threads = 1;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// mean((pred - truth)^2) + lambda * sum of squared weight entries.
ad::Tensor loss(const ad::Tensor& pred, const ad::Tensor& truth,
                const std::vector<NamedParameter>& params, double lambda);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState for_parameters(const std::vector<NamedParameter>& params);
};

/// One bias-corrected Adam update from the gradients held by the parameters.
/// Parameters without a gradient are treated as having a zero gradient.
/// Throws TrainingDiverged naming the first parameter with a non-finite
/// gradient; nothing is updated in that case.
void adam_step(std::vector<NamedParameter>& params, AdamState& state, double lr);

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(std::vector<NamedParameter>& params, double max_norm);

struct Evaluation {
  /// Denormalized, window-major: row b*n + i is node i of test window b.
  Eigen::MatrixXd truth;
  Eigen::MatrixXd pred;
  MetricsReport metrics;
};

/// Predicts every window in batches (optionally on several threads) and
/// scores the denormalized result.
Evaluation evaluate(const SequenceModel& model, const WindowSet& windows,
                    const MinMaxScaler& scaler, std::size_t batch_size = 64,
                    std::size_t threads = 1);

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  MetricsReport metrics;
};

struct TrainResult {
  SequenceModel best;
  SequenceModel final_model;
  std::size_t best_epoch = 0;
  MetricsReport best_metrics;
  MetricsReport final_metrics;
  std::vector<HistoryRow> history;
};

/// Called after each evaluation; useful for progress output.
using EpochCallback = std::function<void(const HistoryRow&)>;

/// Minibatch Adam over shuffled training windows. Evaluates on the test
/// windows every `eval_every` epochs and after the last epoch, keeping the
/// snapshot with the lowest test RMSE. Throws TrainingDiverged with the epoch
/// index on a non-finite gradient, DataError when either window set is empty.
TrainResult train(SequenceModel model, const WindowSplit& windows, const MinMaxScaler& scaler,
                  const TrainConfig& config, const EpochCallback& on_eval = {});

/// Columns: epoch,train_loss,rmse,mae,accuracy,r2,var
void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history);

}  // namespace tgcn
