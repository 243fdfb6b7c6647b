// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tgcn/autodiff.hpp"
#include "tgcn/graph.hpp"

namespace tgcn {

enum class ModelKind { tgcn, gcn_only, gru_only, ha };

std::string_view to_string(ModelKind kind);
/// Accepts "tgcn", "gcn", "gru", "ha" and the long forms "gcn_only", "gru_only".
ModelKind parse_model_kind(std::string_view name);

/// Two-layer graph convolution: P relu(P X W0) W1. The outer activation is
/// the identity; callers apply their own nonlinearity.
struct GcnEncoder {
  ad::Tensor propagation;  // constant [n x n]
  ad::Tensor w0;           // [in_dim x gc_hidden]
  ad::Tensor w1;           // [gc_hidden x out_dim]
};

/// X may stack several graphs' node features as consecutive n-row blocks.
ad::Tensor gcn_forward(const GcnEncoder& encoder, const ad::Tensor& x);

/// Update/reset/candidate gate parameters shared by the T-GCN and GRU cells.
struct GateParams {
  ad::Tensor w_u, w_r, w_c;  // [2*hidden x hidden]
  ad::Tensor b_u, b_r, b_c;  // [1 x hidden]
};

struct GateActivations {
  ad::Tensor update;
  ad::Tensor reset;
  ad::Tensor candidate;
  ad::Tensor hidden;
};

/// u = sig([g,h]Wu + bu), r = sig([g,h]Wr + br), c = tanh([g, r*h]Wc + bc),
/// h' = u*h + (1-u)*c.
GateActivations gated_update(const GateParams& gates, const ad::Tensor& features,
                             const ad::Tensor& h_prev);

struct TgcnCell {
  GcnEncoder gcn;  // in_dim 1, out_dim hidden
  GateParams gates;
  std::size_t hidden = 0;
};

struct GruCell {
  ad::Tensor w_in;  // [1 x hidden]
  GateParams gates;
  std::size_t hidden = 0;
};

/// x_t: [n x 1] (or stacked blocks), h_prev: matching rows x hidden.
ad::Tensor tgcn_step(const TgcnCell& cell, const ad::Tensor& x_t, const ad::Tensor& h_prev);
ad::Tensor gru_step(const GruCell& cell, const ad::Tensor& x_t, const ad::Tensor& h_prev);

struct ModelConfig {
  ModelKind kind = ModelKind::tgcn;
  std::size_t n_nodes = 0;
  std::size_t hidden = 100;
  std::size_t seq_len = 12;
  std::size_t horizon = 1;
};

struct NamedParameter {
  std::string name;
  ad::Tensor value;
  /// Weights enter the L2 penalty; biases do not.
  bool is_weight = true;
};

/// A forecasting model: recurrent or graph encoder plus a per-node linear
/// head mapping the final hidden state to `horizon` future values.
class SequenceModel {
 public:
  /// Parameters are allocated zero-filled; see init_parameters().
  SequenceModel(ModelConfig config, const RoadNetwork& network);

  const ModelConfig& config() const { return config_; }
  const ad::Tensor& propagation() const { return propagation_; }

  std::vector<NamedParameter>& parameters() { return params_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  const ad::Tensor& parameter(std::string_view name) const;
  ad::Tensor& parameter(std::string_view name);

  /// Views that share this model's parameter storage.
  GcnEncoder encoder() const;
  TgcnCell tgcn_cell() const;
  GruCell gru_cell() const;

  /// window: [seq_len x n_nodes] -> [n_nodes x horizon].
  ad::Tensor forward(const ad::Tensor& window) const;
  /// Each window is [seq_len x n_nodes]; result rows are window-major:
  /// row b*n + i is node i of window b.
  ad::Tensor forward_batch(std::span<const Eigen::MatrixXd* const> windows) const;

  /// Deep copy with independent parameter storage.
  SequenceModel clone() const;

 private:
  void add_parameter(std::string name, std::size_t rows, std::size_t cols, bool is_weight);
  ad::Tensor project(const ad::Tensor& hidden) const;

  ModelConfig config_;
  ad::Tensor propagation_;
  std::vector<NamedParameter> params_;
};

ad::Tensor forward_sequence(const SequenceModel& model, const ad::Tensor& window);

/// Historical average: per node, the mean of the window repeated over the
/// horizon.
ad::Tensor ha_predict(const ad::Tensor& window, std::size_t horizon);

/// Uniform Glorot weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
/// Deterministic in the seed.
void init_parameters(SequenceModel& model, std::uint64_t seed);

}  // namespace tgcn
