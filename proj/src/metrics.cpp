// SPDX-License-Identifier: Apache-2.0
#include "tgcn/metrics.hpp"

#include <cmath>

#include "tgcn/errors.hpp"

namespace tgcn {
namespace {

double population_variance(const Eigen::ArrayXd& v) {
  const double m = v.mean();
  return (v - m).square().mean();
}

}  // namespace

MetricsReport compute_metrics(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) {
    throw ShapeError("metrics: truth is " + std::to_string(truth.rows()) + "x" +
                     std::to_string(truth.cols()) + ", prediction is " +
                     std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()));
  }
  if (truth.size() == 0) throw ShapeError("metrics: empty input");

  const Eigen::ArrayXd y = truth.reshaped().array();
  const Eigen::ArrayXd residual = y - pred.reshaped().array();
  const double n = static_cast<double>(y.size());
  const double sse = residual.square().sum();

  MetricsReport r;
  r.n_points = static_cast<std::size_t>(y.size());
  r.rmse = std::sqrt(sse / n);
  r.mae = residual.abs().sum() / n;

  const double truth_norm = std::sqrt(y.square().sum());
  if (truth_norm > 0.0) r.accuracy = 1.0 - std::sqrt(sse) / truth_norm;

  const double sst = (y - y.mean()).square().sum();
  const double var_truth = population_variance(y);
  if (sst > 0.0 && var_truth > 0.0) {
    r.r2 = 1.0 - sse / sst;
    r.var = 1.0 - population_variance(residual) / var_truth;
  }
  return r;
}

nlohmann::ordered_json metrics_json(const MetricsReport& report, const std::string& model,
                                    const std::string& dataset, std::size_t horizon_steps,
                                    const std::optional<Perturbation>& perturbation) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["model"] = model;
  j["dataset"] = dataset;
  j["horizon_steps"] = horizon_steps;
  j["rmse"] = report.rmse;
  j["mae"] = report.mae;
  j["accuracy"] = opt(report.accuracy);
  j["r2"] = opt(report.r2);
  j["var"] = opt(report.var);
  j["n_points"] = report.n_points;
  if (perturbation) {
    j["perturbation"] = {{"dist", perturbation->dist},
                         {"param", perturbation->param},
                         {"seed", perturbation->seed}};
  }
  return j;
}

}  // namespace tgcn
