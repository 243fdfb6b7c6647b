// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "test_support.hpp"
#include "tgcn/checkpoint.hpp"
#include "tgcn/errors.hpp"

using namespace tgcn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
  std::mt19937_64 rng(10);
  RoadNetwork net(testing::random_symmetric_adjacency(rng, 5, 0.5));
  const auto path = fs::temp_directory_path() / "tgcn_roundtrip.ckpt";
  for (auto kind : {ModelKind::tgcn, ModelKind::gru_only, ModelKind::gcn_only, ModelKind::ha}) {
    SequenceModel model({kind, 5, 4, 3, 2}, net);
    init_parameters(model, 77);
    for (auto& p : model.parameters())
      if (!p.is_weight) p.value.data()[0] = 0.125;
    save_checkpoint(model, path);
    SequenceModel loaded = load_checkpoint(path, net);
    CHECK(loaded.config().kind == kind);
    REQUIRE(loaded.parameters().size() == model.parameters().size());
    for (std::size_t k = 0; k < model.parameters().size(); ++k) {
      const auto& a = model.parameters()[k];
      const auto& b = loaded.parameters()[k];
      CHECK(a.name == b.name);
      CHECK(std::memcmp(a.value.data().data(), b.value.data().data(), a.value.numel() * sizeof(double)) == 0);
    }
    Eigen::MatrixXd window = testing::random_matrix(rng, 3, 5, 0.0, 1.0);
    CHECK(model.forward(ad::Tensor::from(window)).to_eigen() == loaded.forward(ad::Tensor::from(window)).to_eigen());
  }
}

TEST_CASE("checkpoint layout starts with magic, version and JSON header") {
  auto net = RoadNetwork::edgeless(2);
  SequenceModel model({ModelKind::gru_only, 2, 3, 4, 1}, net);
  const auto path = fs::temp_directory_path() / "tgcn_layout.ckpt";
  save_checkpoint(model, path);
  const std::string bytes = slurp(path);
  CHECK(bytes.substr(0, 4) == "TGCN");
  CHECK(static_cast<unsigned char>(bytes[4]) == kCheckpointVersion);
  CHECK(bytes[5] == 0);
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[6 + i])) << (8 * i);
  const auto header = nlohmann::json::parse(bytes.substr(10, len));
  CHECK(header["kind"] == "gru");
  CHECK(header["hidden"] == 3);
  CHECK(header["parameters"][0]["name"] == "gru.w_in");
  std::size_t doubles = 0;
  for (const auto& p : model.parameters()) doubles += p.value.numel();
  CHECK(bytes.size() == 10 + len + doubles * 8);
}

TEST_CASE("checkpoint errors") {
  auto net = RoadNetwork::edgeless(3);
  SequenceModel model({ModelKind::tgcn, 3, 4, 2, 1}, net);
  init_parameters(model, 1);
  const auto path = fs::temp_directory_path() / "tgcn_err.ckpt";
  save_checkpoint(model, path);
  const std::string good = slurp(path);

  SUBCASE("corrupt magic") {
    std::string bad = good;
    bad[0] = 'X';
    dump(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path, net), CheckpointError);
  }
  SUBCASE("version mismatch") {
    std::string bad = good;
    bad[4] = 9;
    dump(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path, net), CheckpointError);
  }
  SUBCASE("truncated") {
    dump(path, good.substr(0, good.size() - 3));
    CHECK_THROWS_AS(load_checkpoint(path, net), CheckpointError);
    dump(path, good.substr(0, 12));
    CHECK_THROWS_AS(load_checkpoint(path, net), CheckpointError);
  }
  SUBCASE("mismatched hidden size") {
    SequenceModel other({ModelKind::tgcn, 3, 5, 2, 1}, net);
    CHECK_THROWS_AS(load_parameters(other, path), CheckpointError);
    SequenceModel other_horizon({ModelKind::tgcn, 3, 4, 2, 2}, net);
    CHECK_THROWS_AS(load_parameters(other_horizon, path), CheckpointError);
    SequenceModel same({ModelKind::tgcn, 3, 4, 2, 1}, net);
    CHECK_NOTHROW(load_parameters(same, path));
  }
  SUBCASE("node count mismatch") {
    CHECK_THROWS_AS(load_checkpoint(path, RoadNetwork::edgeless(4)), CheckpointError);
  }
  SUBCASE("non-finite parameters are refused") {
    model.parameters()[0].value.data()[0] = std::nan("");
    CHECK_THROWS_AS(save_checkpoint(model, path), CheckpointError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(fs::temp_directory_path() / "does_not_exist.ckpt", net), CheckpointError);
  }
}
