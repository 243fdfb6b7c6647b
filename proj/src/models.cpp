// SPDX-License-Identifier: Apache-2.0
#include "tgcn/models.hpp"

#include <cmath>
#include <random>

#include "tgcn/errors.hpp"

namespace tgcn {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::tgcn: return "tgcn";
    case ModelKind::gcn_only: return "gcn";
    case ModelKind::gru_only: return "gru";
    case ModelKind::ha: return "ha";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "tgcn") return ModelKind::tgcn;
  if (name == "gcn" || name == "gcn_only") return ModelKind::gcn_only;
  if (name == "gru" || name == "gru_only") return ModelKind::gru_only;
  if (name == "ha") return ModelKind::ha;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

ad::Tensor gcn_forward(const GcnEncoder& encoder, const ad::Tensor& x) {
  if (x.rows() % encoder.propagation.rows() != 0) {
    throw ShapeError("gcn_forward: feature rows " + std::to_string(x.rows()) +
                     " are not a multiple of n_nodes " +
                     std::to_string(encoder.propagation.rows()));
  }
  // (P X) W0 == P (X W0); the left form is cheaper when in_dim < gc_hidden.
  ad::Tensor first = ad::relu(ad::matmul(ad::block_left_multiply(encoder.propagation, x), encoder.w0));
  return ad::matmul(ad::block_left_multiply(encoder.propagation, first), encoder.w1);
}

GateActivations gated_update(const GateParams& gates, const ad::Tensor& features,
                             const ad::Tensor& h_prev) {
  GateActivations out;
  ad::Tensor joined = ad::concat_cols(features, h_prev);
  out.update = ad::sigmoid(ad::add(ad::matmul(joined, gates.w_u), gates.b_u));
  out.reset = ad::sigmoid(ad::add(ad::matmul(joined, gates.w_r), gates.b_r));
  ad::Tensor reset_joined = ad::concat_cols(features, ad::hadamard(out.reset, h_prev));
  out.candidate = ad::tanh(ad::add(ad::matmul(reset_joined, gates.w_c), gates.b_c));
  out.hidden = ad::add(ad::hadamard(out.update, h_prev),
                       ad::hadamard(ad::one_minus(out.update), out.candidate));
  return out;
}

namespace {

void check_step_shapes(const char* op, const ad::Tensor& x_t, const ad::Tensor& h_prev,
                       std::size_t hidden) {
  if (x_t.cols() != 1 || h_prev.rows() != x_t.rows() || h_prev.cols() != hidden) {
    throw ShapeError(std::string(op) + ": x_t " + ad::to_string(x_t.shape()) + " and h_prev " +
                     ad::to_string(h_prev.shape()) + " do not match hidden size " +
                     std::to_string(hidden));
  }
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

ad::Tensor tgcn_step(const TgcnCell& cell, const ad::Tensor& x_t, const ad::Tensor& h_prev) {
  check_step_shapes("tgcn_step", x_t, h_prev, cell.hidden);
  return gated_update(cell.gates, gcn_forward(cell.gcn, x_t), h_prev).hidden;
}

ad::Tensor gru_step(const GruCell& cell, const ad::Tensor& x_t, const ad::Tensor& h_prev) {
  check_step_shapes("gru_step", x_t, h_prev, cell.hidden);
  return gated_update(cell.gates, ad::matmul(x_t, cell.w_in), h_prev).hidden;
}

// ---- SequenceModel ---------------------------------------------------------

SequenceModel::SequenceModel(ModelConfig config, const RoadNetwork& network)
    : config_(config), propagation_(ad::Tensor::from(network.propagation())) {
  if (config_.n_nodes == 0) config_.n_nodes = static_cast<std::size_t>(network.n_nodes());
  if (config_.n_nodes != static_cast<std::size_t>(network.n_nodes())) {
    throw ShapeError("model expects " + std::to_string(config_.n_nodes) +
                     " nodes but the network has " + std::to_string(network.n_nodes()));
  }
  if (config_.horizon == 0 || config_.seq_len == 0 || config_.hidden == 0) {
    throw ConfigError("hidden, seq_len and horizon must all be >= 1");
  }
  const std::size_t h = config_.hidden;
  switch (config_.kind) {
    case ModelKind::tgcn:
      add_parameter("gcn.w0", 1, h, true);
      add_parameter("gcn.w1", h, h, true);
      break;
    case ModelKind::gru_only:
      add_parameter("gru.w_in", 1, h, true);
      break;
    case ModelKind::gcn_only:
      add_parameter("gcn.w0", config_.seq_len, h, true);
      add_parameter("gcn.w1", h, h, true);
      break;
    case ModelKind::ha:
      return;
  }
  if (config_.kind != ModelKind::gcn_only) {
    for (const char* g : {"u", "r", "c"}) add_parameter(std::string("gate.w_") + g, 2 * h, h, true);
    for (const char* g : {"u", "r", "c"}) add_parameter(std::string("gate.b_") + g, 1, h, false);
  }
  add_parameter("out.w", h, config_.horizon, true);
  add_parameter("out.b", 1, config_.horizon, false);
}

void SequenceModel::add_parameter(std::string name, std::size_t rows, std::size_t cols,
                                  bool is_weight) {
  params_.push_back({std::move(name), ad::Tensor::zeros(rows, cols, true), is_weight});
}

const ad::Tensor& SequenceModel::parameter(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.value;
  throw ContractError("model has no parameter '" + std::string(name) + "'");
}

ad::Tensor& SequenceModel::parameter(std::string_view name) {
  return const_cast<ad::Tensor&>(std::as_const(*this).parameter(name));
}

GcnEncoder SequenceModel::encoder() const {
  return {propagation_, parameter("gcn.w0"), parameter("gcn.w1")};
}

namespace {
GateParams gates_of(const SequenceModel& m) {
  return {m.parameter("gate.w_u"), m.parameter("gate.w_r"), m.parameter("gate.w_c"),
          m.parameter("gate.b_u"), m.parameter("gate.b_r"), m.parameter("gate.b_c")};
}
}  // namespace

TgcnCell SequenceModel::tgcn_cell() const { return {encoder(), gates_of(*this), config_.hidden}; }

GruCell SequenceModel::gru_cell() const {
  return {parameter("gru.w_in"), gates_of(*this), config_.hidden};
}

ad::Tensor SequenceModel::project(const ad::Tensor& hidden) const {
  return ad::add(ad::matmul(hidden, parameter("out.w")), parameter("out.b"));
}

ad::Tensor SequenceModel::forward(const ad::Tensor& window) const {
  Eigen::MatrixXd w = window.to_eigen();
  const Eigen::MatrixXd* ptr = &w;
  return forward_batch(std::span<const Eigen::MatrixXd* const>(&ptr, 1));
}

ad::Tensor SequenceModel::forward_batch(std::span<const Eigen::MatrixXd* const> windows) const {
  const std::size_t n = config_.n_nodes;
  const std::size_t batch = windows.size();
  if (batch == 0) throw ShapeError("forward_batch: empty batch");
  for (const auto* w : windows) {
    if (static_cast<std::size_t>(w->rows()) != config_.seq_len ||
        static_cast<std::size_t>(w->cols()) != n) {
      throw ShapeError("window is [" + std::to_string(w->rows()) + "x" +
                       std::to_string(w->cols()) + "], model expects [" +
                       std::to_string(config_.seq_len) + "x" + std::to_string(n) + "]");
    }
  }

  if (config_.kind == ModelKind::ha) {
    ad::Buffer out(batch * n * config_.horizon);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t t = 0; t < config_.seq_len; ++t)
          total += (*windows[b])(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
        const double avg = total / static_cast<double>(config_.seq_len);
        for (std::size_t k = 0; k < config_.horizon; ++k)
          out[(b * n + i) * config_.horizon + k] = avg;
      }
    return ad::Tensor::from(batch * n, config_.horizon, std::move(out));
  }

  if (config_.kind == ModelKind::gcn_only) {
    ad::Buffer features(batch * n * config_.seq_len);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < config_.seq_len; ++t)
          features[(b * n + i) * config_.seq_len + t] =
              (*windows[b])(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
    ad::Tensor x = ad::Tensor::from(batch * n, config_.seq_len, std::move(features));
    return project(gcn_forward(encoder(), x));
  }

  ad::Tensor h = ad::Tensor::zeros(batch * n, config_.hidden);
  const bool graph = config_.kind == ModelKind::tgcn;
  const TgcnCell tcell = graph ? tgcn_cell() : TgcnCell{};
  const GruCell gcell = graph ? GruCell{} : gru_cell();
  for (std::size_t t = 0; t < config_.seq_len; ++t) {
    ad::Buffer column(batch * n);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < n; ++i)
        column[b * n + i] = (*windows[b])(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
    ad::Tensor x_t = ad::Tensor::from(batch * n, 1, std::move(column));
    h = graph ? tgcn_step(tcell, x_t, h) : gru_step(gcell, x_t, h);
  }
  return project(h);
}

SequenceModel SequenceModel::clone() const {
  SequenceModel copy = *this;
  for (auto& p : copy.params_) p.value = p.value.clone();
  return copy;
}

ad::Tensor forward_sequence(const SequenceModel& model, const ad::Tensor& window) {
  return model.forward(window);
}

ad::Tensor ha_predict(const ad::Tensor& window, std::size_t horizon) {
  if (horizon == 0) throw ConfigError("ha_predict: horizon must be >= 1");
  const std::size_t len = window.rows();
  const std::size_t n = window.cols();
  ad::Buffer out(n * horizon);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t t = 0; t < len; ++t) total += window(t, i);
    const double avg = total / static_cast<double>(len);
    for (std::size_t k = 0; k < horizon; ++k) out[i * horizon + k] = avg;
  }
  return ad::Tensor::from(n, horizon, std::move(out));
}

void init_parameters(SequenceModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : model.parameters()) {
    auto data = p.value.data();
    if (!p.is_weight) {
      std::fill(data.begin(), data.end(), 0.0);
      continue;
    }
    const double limit = glorot_limit(p.value.rows(), p.value.cols());
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : data) v = dist(rng);
  }
}

}  // namespace tgcn
