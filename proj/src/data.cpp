// SPDX-License-Identifier: Apache-2.0
#include "tgcn/data.hpp"

#include <cmath>
#include <random>

#include "tgcn/csv.hpp"
#include "tgcn/errors.hpp"

namespace tgcn {

Eigen::MatrixXd MinMaxScaler::normalize(const Eigen::MatrixXd& m) const {
  return m.unaryExpr([this](double x) { return normalize(x); });
}

Eigen::MatrixXd MinMaxScaler::denormalize(const Eigen::MatrixXd& m) const {
  return m.unaryExpr([this](double x) { return denormalize(x); });
}

std::size_t TimeSeriesDataset::split_index() const {
  return static_cast<std::size_t>(std::floor(split_fraction * static_cast<double>(n_steps())));
}

TimeSeriesDataset load_features(const std::filesystem::path& path, std::size_t expect_nodes,
                                bool transpose, int interval_minutes) {
  Eigen::MatrixXd m = csv::read_matrix(path);
  if (transpose) m.transposeInPlace();
  if (expect_nodes != 0 && static_cast<std::size_t>(m.cols()) != expect_nodes) {
    throw ParseError(path.string() + ": expected " + std::to_string(expect_nodes) +
                     " node columns, found " + std::to_string(m.cols()));
  }
  TimeSeriesDataset ds;
  ds.values = std::move(m);
  ds.interval_minutes = interval_minutes;
  return ds;
}

TimeSeriesDataset interpolate_missing(TimeSeriesDataset dataset,
                                      std::optional<double> missing_marker) {
  auto missing = [&](double v) { return std::isnan(v) || (missing_marker && v == *missing_marker); };
  Eigen::MatrixXd& x = dataset.values;
  const Eigen::Index steps = x.rows();
  for (Eigen::Index node = 0; node < x.cols(); ++node) {
    std::vector<Eigen::Index> valid;
    for (Eigen::Index t = 0; t < steps; ++t)
      if (!missing(x(t, node))) valid.push_back(t);
    if (valid.empty()) throw DataError("node " + std::to_string(node) + " has no valid values");
    if (static_cast<Eigen::Index>(valid.size()) == steps) continue;

    for (Eigen::Index t = 0; t < valid.front(); ++t) x(t, node) = x(valid.front(), node);
    for (Eigen::Index t = valid.back() + 1; t < steps; ++t) x(t, node) = x(valid.back(), node);
    for (std::size_t k = 0; k + 1 < valid.size(); ++k) {
      const Eigen::Index lo = valid[k];
      const Eigen::Index hi = valid[k + 1];
      const double a = x(lo, node);
      const double b = x(hi, node);
      for (Eigen::Index t = lo + 1; t < hi; ++t) {
        const double w = static_cast<double>(t - lo) / static_cast<double>(hi - lo);
        x(t, node) = a + w * (b - a);
      }
    }
  }
  return dataset;
}

TimeSeriesDataset normalize(TimeSeriesDataset dataset) {
  const auto split = static_cast<Eigen::Index>(dataset.split_index());
  if (split == 0) throw DataError("training range is empty");
  const auto train = dataset.values.topRows(split);
  MinMaxScaler scaler{train.minCoeff(), train.maxCoeff()};
  if (!(scaler.min < scaler.max))
    throw DataError("training data is constant; min-max normalization is undefined");
  dataset.values = scaler.normalize(dataset.values);
  dataset.scaler = scaler;
  return dataset;
}

Eigen::MatrixXd denormalize(const TimeSeriesDataset& dataset, const Eigen::MatrixXd& m) {
  if (!dataset.scaler) throw DataError("dataset has not been normalized");
  return dataset.scaler->denormalize(m);
}

WindowSplit make_windows(const TimeSeriesDataset& dataset, std::size_t seq_len,
                         std::size_t horizon) {
  if (seq_len == 0 || horizon == 0) throw ConfigError("seq_len and horizon must be >= 1");
  const std::size_t steps = dataset.n_steps();
  if (steps < seq_len + horizon + 1) {
    throw DataError("series of " + std::to_string(steps) + " steps is too short for seq_len " +
                    std::to_string(seq_len) + " + horizon " + std::to_string(horizon));
  }
  WindowSplit split;
  split.split_index = dataset.split_index();
  split.train.seq_len = split.test.seq_len = seq_len;
  split.train.horizon = split.test.horizon = horizon;

  const auto n = static_cast<Eigen::Index>(dataset.n_nodes());
  for (std::size_t s = 0; s + seq_len + horizon <= steps; ++s) {
    WindowSet* target = nullptr;
    if (s + seq_len + horizon < split.split_index) {
      target = &split.train;
    } else if (s + seq_len >= split.split_index) {
      target = &split.test;
    } else {
      continue;
    }
    target->starts.push_back(s);
    target->inputs.push_back(
        dataset.values.block(static_cast<Eigen::Index>(s), 0, static_cast<Eigen::Index>(seq_len), n));
    target->targets.push_back(dataset.values
                                  .block(static_cast<Eigen::Index>(s + seq_len), 0,
                                         static_cast<Eigen::Index>(horizon), n)
                                  .transpose());
  }
  return split;
}

NoiseDist parse_noise_dist(std::string_view name) {
  if (name == "gaussian") return NoiseDist::gaussian;
  if (name == "poisson") return NoiseDist::poisson;
  throw ConfigError("unknown noise distribution '" + std::string(name) + "'");
}

std::string_view to_string(NoiseDist dist) {
  return dist == NoiseDist::gaussian ? "gaussian" : "poisson";
}

Eigen::MatrixXd draw_noise(Eigen::Index rows, Eigen::Index cols, NoiseDist dist, double param,
                           std::uint64_t seed) {
  if (!(param > 0.0) || !std::isfinite(param))
    throw ConfigError("noise parameter must be a positive real, got " + std::to_string(param));
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd noise(rows, cols);
  if (dist == NoiseDist::gaussian) {
    std::normal_distribution<double> d(0.0, param);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) noise(r, c) = d(rng);
  } else {
    std::poisson_distribution<long long> d(param);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) noise(r, c) = static_cast<double>(d(rng)) - param;
  }
  const double lo = noise.minCoeff();
  const double hi = noise.maxCoeff();
  if (!(lo < hi)) throw ConfigError("noise matrix is constant; cannot rescale to [0,1]");
  return (noise.array() - lo) / (hi - lo);
}

TimeSeriesDataset add_noise(TimeSeriesDataset dataset, NoiseDist dist, double param,
                            std::uint64_t seed) {
  if (!(param > 0.0)) throw ConfigError("noise parameter must be positive");
  if (!dataset.scaler) throw DataError("add_noise expects a normalized dataset");
  dataset.values += draw_noise(dataset.values.rows(), dataset.values.cols(), dist, param, seed);
  return dataset;
}

}  // namespace tgcn
