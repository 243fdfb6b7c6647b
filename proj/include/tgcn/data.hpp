// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace tgcn {

/// Single affine map x -> (x - min) / (max - min) shared by all nodes.
struct MinMaxScaler {
  double min = 0.0;
  double max = 1.0;

  double normalize(double x) const { return (x - min) / (max - min); }
  double denormalize(double x) const { return x * (max - min) + min; }
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& m) const;
  Eigen::MatrixXd denormalize(const Eigen::MatrixXd& m) const;
};

/// Node-by-time speed matrix stored as rows = timesteps, columns = nodes.
struct TimeSeriesDataset {
  Eigen::MatrixXd values;
  int interval_minutes = 15;
  double split_fraction = 0.8;
  /// Present once normalize() has run; fitted on the training rows only.
  std::optional<MinMaxScaler> scaler;

  std::size_t n_steps() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_nodes() const { return static_cast<std::size_t>(values.cols()); }
  /// floor(split_fraction * n_steps): first timestep belonging to the test range.
  std::size_t split_index() const;
};

/// Headerless CSV with rows = timesteps. `transpose` accepts rows = nodes.
/// Throws ParseError when the node count differs from `expect_nodes`
/// (0 disables the check).
TimeSeriesDataset load_features(const std::filesystem::path& path, std::size_t expect_nodes,
                                bool transpose = false, int interval_minutes = 15);

/// Fills NaN cells, and cells equal to `missing_marker` when given, by linear
/// interpolation along time; leading and trailing gaps take the nearest valid
/// value. Throws DataError if a node has no valid value at all.
TimeSeriesDataset interpolate_missing(TimeSeriesDataset dataset,
                                      std::optional<double> missing_marker);

/// Min-max scales with statistics from the rows before split_index().
/// Throws DataError if those rows are constant.
TimeSeriesDataset normalize(TimeSeriesDataset dataset);
Eigen::MatrixXd denormalize(const TimeSeriesDataset& dataset, const Eigen::MatrixXd& m);

/// Sliding windows with stride 1. inputs[k] is [seq_len x n_nodes] starting
/// at timestep starts[k]; targets[k] is [n_nodes x horizon], the horizon
/// steps that follow.
struct WindowSet {
  std::size_t seq_len = 0;
  std::size_t horizon = 0;
  std::vector<std::size_t> starts;
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> targets;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
};

struct WindowSplit {
  WindowSet train;
  WindowSet test;
  std::size_t split_index = 0;
};

/// Train windows end strictly before the split index (start + seq_len +
/// horizon < split); test windows have their first target at or after it.
/// The window whose exclusive end equals the split index is dropped. Throws
/// DataError if n_steps < seq_len + horizon + 1.
WindowSplit make_windows(const TimeSeriesDataset& dataset, std::size_t seq_len,
                         std::size_t horizon);

enum class NoiseDist { gaussian, poisson };
NoiseDist parse_noise_dist(std::string_view name);
std::string_view to_string(NoiseDist dist);

/// Draws a noise matrix shaped like the data (N(0, param^2) or
/// Poisson(param) - param), rescales it to [0,1] and adds it to the
/// normalized values. Throws ConfigError for param <= 0 or a degenerate noise
/// matrix, DataError if the dataset has not been normalized.
TimeSeriesDataset add_noise(TimeSeriesDataset dataset, NoiseDist dist, double param,
                            std::uint64_t seed);

/// The rescaled noise matrix add_noise() would add.
Eigen::MatrixXd draw_noise(Eigen::Index rows, Eigen::Index cols, NoiseDist dist, double param,
                           std::uint64_t seed);

}  // namespace tgcn
