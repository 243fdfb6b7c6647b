// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tgcn/cli.hpp"
#include "tgcn/csv.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "tgcn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = tgcn::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Five-node ring with a smooth periodic signal.
struct Fixture {
  fs::path dir;
  fs::path adj;
  fs::path feat;

  Fixture() {
    dir = fs::temp_directory_path() / "tgcn_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    adj = dir / "adj.csv";
    feat = dir / "feat.csv";
    const int n = 5;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) a(i, (i + 1) % n) = a((i + 1) % n, i) = 1.0;
    tgcn::csv::write_matrix(adj, a);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> jitter(0.0, 0.1);
    Eigen::MatrixXd x(60, n);
    for (int t = 0; t < 60; ++t)
      for (int i = 0; i < n; ++i) x(t, i) = 10.0 + 3.0 * std::sin(0.4 * t + i) + jitter(rng);
    tgcn::csv::write_matrix(feat, x);
  }

  std::vector<std::string> data_args() const {
    return {"--adj", adj.string(), "--features", feat.string(), "--dataset-name", "ring"};
  }
  std::vector<std::string> with(std::string cmd, std::vector<std::string> extra) const {
    std::vector<std::string> args{std::move(cmd)};
    for (auto& a : data_args()) args.push_back(a);
    for (auto& a : extra) args.push_back(a);
    return args;
  }
};

const std::vector<std::string> kSmall{"--hidden", "4", "--seq-len", "4", "--epochs", "4", "--eval-every", "2", "--quiet"};

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  Fixture fx;
  CHECK(run({"train", "--features", fx.feat.string()}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"train"}).code == 2);
  CHECK(run(fx.with("train", {"--model", "lstm"})).code == 2);
}

TEST_CASE("library errors exit 1 with a JSON error object") {
  Fixture fx;
  auto o = run(fx.with("perturb", kSmall + std::vector<std::string>{"--dist", "gaussian", "--param", "0"}));
  CHECK(o.code == 1);
  auto err = nlohmann::json::parse(o.err);
  CHECK(err["error"] == "ConfigError");
  CHECK(err["message"].is_string());

  auto missing = run({"train", "--adj", (fx.dir / "nope.csv").string(), "--features", fx.feat.string()});
  CHECK(missing.code == 1);
}

TEST_CASE("ha emits metrics JSON") {
  Fixture fx;
  auto o = run(fx.with("train", {"--model", "ha", "--seq-len", "4", "--horizon-steps", "2"}));
  REQUIRE(o.code == 0);
  auto j = nlohmann::json::parse(o.out);
  CHECK(j["model"] == "ha");
  CHECK(j["dataset"] == "ring");
  CHECK(j["horizon_steps"] == 2);
  for (const char* key : {"rmse", "mae", "accuracy", "r2", "var"}) CHECK(j.contains(key));
  CHECK(j["rmse"].get<double>() > 0.0);
}

TEST_CASE("train then eval reproduces the metrics") {
  Fixture fx;
  const auto ckpt = (fx.dir / "model.bin").string();
  const auto metrics = (fx.dir / "train.json").string();
  auto trained = run(fx.with("train", kSmall + std::vector<std::string>{"--out", ckpt, "--metrics-out", metrics,
                                                                        "--history-out", (fx.dir / "h.csv").string()}));
  REQUIRE_MESSAGE(trained.code == 0, trained.err);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(ckpt + ".final"));
  CHECK(fs::exists(fx.dir / "h.csv"));

  const auto eval_path = (fx.dir / "eval.json").string();
  auto evaluated = run(fx.with("eval", {"--checkpoint", ckpt, "--metrics-out", eval_path}));
  REQUIRE_MESSAGE(evaluated.code == 0, evaluated.err);
  auto a = nlohmann::json::parse(slurp(metrics));
  auto b = nlohmann::json::parse(slurp(eval_path));
  for (const char* key : {"rmse", "mae", "accuracy", "r2", "var"}) CHECK(a[key] == b[key]);

  auto wrong = run(fx.with("eval", {"--checkpoint", ckpt, "--horizon-steps", "3"}));
  CHECK(wrong.code == 1);
  CHECK(nlohmann::json::parse(wrong.err)["error"] == "CheckpointError");

  const auto preds = fx.dir / "preds.csv";
  auto predicted = run(fx.with("predict", {"--checkpoint", ckpt, "--out", preds.string()}));
  REQUIRE(predicted.code == 0);
  CHECK(fs::file_size(preds) > 0);
}

TEST_CASE("identical runs write byte-identical metrics") {
  Fixture fx;
  const auto one = (fx.dir / "one.json").string();
  const auto two = (fx.dir / "two.json").string();
  REQUIRE(run(fx.with("train", kSmall + std::vector<std::string>{"--seed", "5", "--metrics-out", one})).code == 0);
  REQUIRE(run(fx.with("train", kSmall + std::vector<std::string>{"--seed", "5", "--metrics-out", two})).code == 0);
  CHECK(slurp(one) == slurp(two));
}

TEST_CASE("perturb single settings and sweep") {
  Fixture fx;
  for (auto setting : {std::pair<std::string, std::string>{"gaussian", "0.2"}, {"poisson", "16"}}) {
    auto o = run(fx.with("perturb", kSmall + std::vector<std::string>{"--dist", setting.first, "--param", setting.second}));
    REQUIRE_MESSAGE(o.code == 0, o.err);
    auto j = nlohmann::json::parse(o.out);
    CHECK(j["perturbation"]["dist"] == setting.first);
    CHECK(j["perturbation"]["param"].get<double>() == std::stod(setting.second));
  }
  const auto stem = (fx.dir / "sweep.json").string();
  auto sweep = run(fx.with("perturb", kSmall + std::vector<std::string>{"--dist", "poisson", "--sweep", "--metrics-out", stem}));
  REQUIRE_MESSAGE(sweep.code == 0, sweep.err);
  std::ifstream csv(fx.dir / "sweep_sweep.csv");
  REQUIRE(csv.good());
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 6);
}

TEST_CASE("gradcheck subcommand") {
  auto o = run({"gradcheck"});
  CHECK(o.code == 0);
  auto j = nlohmann::json::parse(o.out);
  CHECK(j["passed"] == true);
  CHECK(run({"gradcheck"}).out == o.out);
}

TEST_CASE("installed binary reports exit codes") {
  const char* bin = std::getenv("TGCN_CLI");
  if (bin == nullptr) return;
  const std::string quiet = " >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system((std::string(bin) + " gradcheck" + quiet).c_str())) == 0);
  CHECK(WEXITSTATUS(std::system((std::string(bin) + " train" + quiet).c_str())) == 2);
}
