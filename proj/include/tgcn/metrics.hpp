// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace tgcn {

/// Evaluation scores on denormalized values. Accuracy is undefined when the
/// truth matrix is all zeros; r2 and var are undefined when the truth has zero
/// variance.
struct MetricsReport {
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> accuracy;
  std::optional<double> r2;
  std::optional<double> var;
  std::size_t n_points = 0;
};

/// All entries of both matrices are pooled. Throws ShapeError on mismatch.
MetricsReport compute_metrics(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred);

struct Perturbation {
  std::string dist;
  double param = 0.0;
  std::uint64_t seed = 0;
};

/// {"model","dataset","horizon_steps","rmse","mae","accuracy","r2","var","n_points"}
/// plus "perturbation" when given. Undefined scores are written as null.
nlohmann::ordered_json metrics_json(const MetricsReport& report, const std::string& model,
                                    const std::string& dataset, std::size_t horizon_steps,
                                    const std::optional<Perturbation>& perturbation = std::nullopt);

}  // namespace tgcn
