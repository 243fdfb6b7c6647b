// SPDX-License-Identifier: Apache-2.0
#include "tgcn/checkpoint.hpp"

#include <array>
#include <cmath>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "tgcn/errors.hpp"

namespace tgcn {
namespace {

constexpr std::array<char, 4> kMagic{'T', 'G', 'C', 'N'};

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint is truncated");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(T);
  return std::bit_cast<T>(bits);
}

struct Parsed {
  ModelConfig config;
  nlohmann::json header;
  std::string bytes;
  std::size_t payload = 0;
};

Parsed read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  Parsed p;
  p.bytes.assign(std::istreambuf_iterator<char>(in), {});
  if (p.bytes.size() < kMagic.size() || std::memcmp(p.bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw CheckpointError(path.string() + ": bad magic, not a checkpoint");
  std::size_t pos = kMagic.size();
  const auto version = get_le<std::uint16_t>(p.bytes, pos);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint32_t>(p.bytes, pos);
  if (pos + header_len > p.bytes.size()) throw CheckpointError("checkpoint header is truncated");
  try {
    p.header = nlohmann::json::parse(p.bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                     p.bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
    p.config.kind = parse_model_kind(p.header.at("kind").get<std::string>());
    p.config.n_nodes = p.header.at("n_nodes").get<std::size_t>();
    p.config.hidden = p.header.at("hidden").get<std::size_t>();
    p.config.seq_len = p.header.at("seq_len").get<std::size_t>();
    p.config.horizon = p.header.at("horizon").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  p.payload = pos + header_len;
  return p;
}

void fill_parameters(SequenceModel& model, const Parsed& p) {
  const auto& entries = p.header.at("parameters");
  auto& params = model.parameters();
  if (entries.size() != params.size())
    throw CheckpointError("checkpoint holds " + std::to_string(entries.size()) +
                          " parameters, model expects " + std::to_string(params.size()));
  std::size_t pos = p.payload;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& e = entries[k];
    const auto name = e.at("name").get<std::string>();
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    auto& t = params[k].value;
    if (name != params[k].name || shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols())
      throw CheckpointError("parameter '" + name + "' does not match model parameter '" +
                            params[k].name + "' " + ad::to_string(t.shape()));
    for (double& v : t.data()) v = get_le<double>(p.bytes, pos);
  }
  if (pos != p.bytes.size()) throw CheckpointError("trailing bytes after checkpoint payload");
}

bool same_config(const ModelConfig& a, const ModelConfig& b) {
  return a.kind == b.kind && a.n_nodes == b.n_nodes && a.hidden == b.hidden &&
         a.seq_len == b.seq_len && a.horizon == b.horizon;
}

std::string describe(const ModelConfig& c) {
  return std::string(to_string(c.kind)) + " n_nodes=" + std::to_string(c.n_nodes) +
         " hidden=" + std::to_string(c.hidden) + " seq_len=" + std::to_string(c.seq_len) +
         " horizon=" + std::to_string(c.horizon);
}

}  // namespace

void save_checkpoint(const SequenceModel& model, const std::filesystem::path& path) {
  const auto& c = model.config();
  nlohmann::json header = {{"kind", std::string(to_string(c.kind))},
                           {"n_nodes", c.n_nodes},
                           {"hidden", c.hidden},
                           {"seq_len", c.seq_len},
                           {"horizon", c.horizon},
                           {"parameters", nlohmann::json::array()}};
  for (const auto& p : model.parameters()) {
    if (!p.value.defined()) throw CheckpointError("parameter '" + p.name + "' is undefined");
    for (double v : p.value.data())
      if (!std::isfinite(v)) throw CheckpointError("parameter '" + p.name + "' is not finite");
    header["parameters"].push_back(
        {{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}});
  }
  const std::string text = header.dump();

  std::string out(kMagic.begin(), kMagic.end());
  put_le<std::uint16_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& p : model.parameters())
    for (double v : p.value.data()) put_le<double>(out, v);

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw CheckpointError("cannot write checkpoint " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw CheckpointError("failed writing checkpoint " + path.string());
}

SequenceModel load_checkpoint(const std::filesystem::path& path, const RoadNetwork& network) {
  Parsed p = read_file(path);
  if (p.config.n_nodes != static_cast<std::size_t>(network.n_nodes()))
    throw CheckpointError("checkpoint has " + std::to_string(p.config.n_nodes) +
                          " nodes, network has " + std::to_string(network.n_nodes()));
  SequenceModel model(p.config, network);
  fill_parameters(model, p);
  return model;
}

void load_parameters(SequenceModel& model, const std::filesystem::path& path) {
  Parsed p = read_file(path);
  if (!same_config(p.config, model.config()))
    throw CheckpointError("checkpoint (" + describe(p.config) + ") does not match model (" +
                          describe(model.config()) + ")");
  fill_parameters(model, p);
}

}  // namespace tgcn
