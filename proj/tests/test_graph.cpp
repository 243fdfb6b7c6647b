// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"
#include "tgcn/errors.hpp"
#include "tgcn/graph.hpp"

using namespace tgcn;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST_CASE("single node propagates to itself") {
  Eigen::MatrixXd p = build_propagation(Eigen::MatrixXd::Zero(1, 1));
  CHECK(p(0, 0) == 1.0);
}

TEST_CASE("two connected nodes average evenly") {
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  Eigen::MatrixXd p = build_propagation(a);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(p(i, j) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("three-node path matches the direct definition") {
  Eigen::MatrixXd a(3, 3);
  a << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  Eigen::MatrixXd p = build_propagation(a);
  auto expected = oracle::propagation(testing::to_oracle(a));
  CHECK(testing::max_abs_diff(testing::to_oracle(p), expected) < 1e-15);
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(p(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-14));
  CHECK(p(0, 1) == doctest::Approx(0.40825).epsilon(1e-5));
  CHECK(p(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(p(0, 2) == 0.0);
}

TEST_CASE("edgeless graph gives the identity") {
  auto net = RoadNetwork::edgeless(6);
  CHECK(net.propagation().isApprox(Eigen::MatrixXd::Identity(6, 6), 0.0));
}

TEST_CASE("invalid adjacency is rejected") {
  CHECK_THROWS_AS(build_propagation(Eigen::MatrixXd::Zero(2, 3)), InvalidGraph);
  CHECK_THROWS_AS(build_propagation(Eigen::MatrixXd::Zero(0, 0)), InvalidGraph);
  Eigen::MatrixXd neg(2, 2);
  neg << 0, -1, -1, 0;
  CHECK_THROWS_AS(build_propagation(neg), InvalidGraph);
  Eigen::MatrixXd asym(2, 2);
  asym << 0, 1, 0, 0;
  CHECK_THROWS_AS(build_propagation(asym), InvalidGraph);
  Eigen::MatrixXd nearly(2, 2);
  nearly << 0, 1, 1 + 1e-12, 0;
  CHECK_NOTHROW(build_propagation(nearly));
}

TEST_CASE("random graphs: symmetric, bounded spectrum, deterministic, oracle-equal") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(1, 20);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(rng);
    Eigen::MatrixXd a = testing::random_symmetric_adjacency(rng, n, 0.35);
    Eigen::MatrixXd p = build_propagation(a);
    CHECK(p == p.transpose());
    CHECK(spectral_radius_estimate(p) <= 1.0 + 1e-9);
    Eigen::MatrixXd again = build_propagation(a);
    CHECK(std::memcmp(p.data(), again.data(), sizeof(double) * p.size()) == 0);
    CHECK(testing::max_abs_diff(testing::to_oracle(p), oracle::propagation(testing::to_oracle(a))) < 1e-12);
  }
}

TEST_CASE("weighted adjacency is used as given") {
  Eigen::MatrixXd a(2, 2);
  a << 0, 0.5, 0.5, 0;
  Eigen::MatrixXd p = build_propagation(a);
  CHECK(p(0, 1) == doctest::Approx(0.5 / 1.5));
  CHECK(p(0, 0) == doctest::Approx(1.0 / 1.5));
}

TEST_CASE("load_adjacency parses CSV and reports locations") {
  auto ok = write_temp("tgcn_adj_ok.csv", "0,1\n1,0\n");
  CHECK(load_adjacency(ok).n_nodes() == 2);

  auto ragged = write_temp("tgcn_adj_ragged.csv", "0,1\n1\n");
  try {
    load_adjacency(ragged);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  auto bad = write_temp("tgcn_adj_bad.csv", "0,x\n1,0\n");
  try {
    load_adjacency(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("row 1, column 2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_adjacency(write_temp("tgcn_adj_empty.csv", "")), ParseError);
  CHECK_THROWS_AS(load_adjacency(write_temp("tgcn_adj_rect.csv", "0,1,0\n1,0,1\n")), ParseError);
}
