// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include <Eigen/Dense>

namespace tgcn {

/// Absolute tolerance used when checking adjacency symmetry.
inline constexpr double kSymmetryTolerance = 1e-9;

/// Symmetric-normalized propagation operator with self-loops:
/// D^-1/2 (A + I) D^-1/2, D_ii = sum_j (A + I)_ij.
///
/// Throws InvalidGraph for a non-square, empty, negative or asymmetric input.
/// Weighted adjacencies are used as given.
Eigen::MatrixXd build_propagation(const Eigen::MatrixXd& adjacency);

/// Road network with its propagation operator precomputed. Immutable after
/// construction.
class RoadNetwork {
 public:
  explicit RoadNetwork(Eigen::MatrixXd adjacency);

  Eigen::Index n_nodes() const { return adjacency_.rows(); }
  const Eigen::MatrixXd& adjacency() const { return adjacency_; }
  const Eigen::MatrixXd& propagation() const { return propagation_; }

  /// Graph with n isolated nodes.
  static RoadNetwork edgeless(Eigen::Index n);

 private:
  Eigen::MatrixXd adjacency_;
  Eigen::MatrixXd propagation_;
};

/// Loads an n x n headerless CSV adjacency.
RoadNetwork load_adjacency(const std::filesystem::path& path);

/// Power-iteration estimate of the spectral radius of a symmetric matrix.
double spectral_radius_estimate(const Eigen::MatrixXd& m, int iterations = 500);

}  // namespace tgcn
