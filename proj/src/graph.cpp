// SPDX-License-Identifier: Apache-2.0
#include "tgcn/graph.hpp"

#include <cmath>
#include <sstream>

#include "tgcn/csv.hpp"
#include "tgcn/errors.hpp"

namespace tgcn {
namespace {

void validate_adjacency(const Eigen::MatrixXd& a) {
  if (a.rows() == 0 || a.rows() != a.cols()) {
    std::ostringstream os;
    os << "adjacency must be square and non-empty, got " << a.rows() << "x" << a.cols();
    throw InvalidGraph(os.str());
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double v = a(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        std::ostringstream os;
        os << "adjacency entry (" << i << "," << j << ") = " << v << " is negative or non-finite";
        throw InvalidGraph(os.str());
      }
      if (std::abs(v - a(j, i)) > kSymmetryTolerance) {
        std::ostringstream os;
        os << "adjacency is not symmetric at (" << i << "," << j << ")";
        throw InvalidGraph(os.str());
      }
    }
  }
}

}  // namespace

Eigen::MatrixXd build_propagation(const Eigen::MatrixXd& adjacency) {
  validate_adjacency(adjacency);
  const Eigen::Index n = adjacency.rows();
  Eigen::MatrixXd with_loops = adjacency + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd inv_sqrt_degree = with_loops.rowwise().sum().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      p(i, j) = inv_sqrt_degree(i) * with_loops(i, j) * inv_sqrt_degree(j);
  // Weighted input may be asymmetric within tolerance; make the result exactly symmetric.
  return 0.5 * (p + p.transpose());
}

RoadNetwork::RoadNetwork(Eigen::MatrixXd adjacency)
    : adjacency_(std::move(adjacency)), propagation_(build_propagation(adjacency_)) {}

RoadNetwork RoadNetwork::edgeless(Eigen::Index n) {
  return RoadNetwork(Eigen::MatrixXd::Zero(n, n));
}

RoadNetwork load_adjacency(const std::filesystem::path& path) {
  Eigen::MatrixXd a = csv::read_matrix(path);
  if (a.rows() != a.cols()) {
    std::ostringstream os;
    os << path.string() << ": adjacency must be n x n, got " << a.rows() << " rows x "
       << a.cols() << " columns";
    throw ParseError(os.str());
  }
  return RoadNetwork(std::move(a));
}

double spectral_radius_estimate(const Eigen::MatrixXd& m, int iterations) {
  const Eigen::Index n = m.rows();
  // Deterministic, non-degenerate start vector.
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.01 * static_cast<double>(i % 7);
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    estimate = norm;
    v = w / norm;
  }
  return estimate;
}

}  // namespace tgcn
