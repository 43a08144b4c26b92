#include "fedtheory_cli/cli.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using fedtheory::cli::ExitCode;

namespace {

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "fedtheory");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = fedtheory::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fedtheory_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kConfigDir = FEDTHEORY_CONFIG_DIR;

}  // namespace

TEST_CASE("run writes a summary with a tiny residual") {
  const auto dir = scratch("run");
  const auto cfg = write(dir / "one.json", R"({"rounds": 1, "x0": [4, 0],
      "population": {"clients": [{"type": "quadratic", "center": [0, 1]}]}})");
  const auto r = invoke({"--quiet", "--out", (dir / "out").string(), "run", "--config", cfg.string()});
  CHECK(r.code == ExitCode::kOk);
  const auto summary = nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(summary["max_identity_residual"].get<double>() <= 1e-9);
}

TEST_CASE("shipped paraboloid config records a region entry round") {
  const auto dir = scratch("paraboloid");
  const auto r = invoke({"--quiet", "--out", dir.string(), "run", "--config", kConfigDir + "/paraboloid.json"});
  CHECK(r.code == ExitCode::kOk);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["region_entry_round"].is_number());
  CHECK(fs::exists(dir / "trajectory.csv"));
}

TEST_CASE("identical invocations give byte-identical logs") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  invoke({"--quiet", "--seed", "9", "--out", a.string(), "run", "--config", kConfigDir + "/sa_qhm.json"});
  invoke({"--quiet", "--seed", "9", "--out", b.string(), "run", "--config", kConfigDir + "/sa_qhm.json"});
  CHECK(slurp(a / "trajectory.jsonl") == slurp(b / "trajectory.jsonl"));
  CHECK_FALSE(slurp(a / "trajectory.jsonl").empty());
}

TEST_CASE("config errors exit with 2 and name the field") {
  const auto dir = scratch("bad");
  const auto cfg = write(dir / "bad.json", R"({"population": {"generator": "paraboloid"}, "server": {"algorithm": "fedfoo"}})");
  const auto r = invoke({"run", "--config", cfg.string()});
  CHECK(r.code == ExitCode::kConfigError);
  CHECK(r.err.find("server.algorithm") != std::string::npos);
  CHECK(invoke({"run", "--config", (dir / "missing.json").string()}).code == ExitCode::kConfigError);
  CHECK(invoke({"frobnicate"}).code == ExitCode::kConfigError);
  CHECK(invoke({"verify", "theorem9"}).code == ExitCode::kConfigError);
}

TEST_CASE("runtime failures exit with 1") {
  const auto dir = scratch("diverge");
  const auto cfg = write(dir / "diverge.json", R"({"rounds": 5, "x0": [5, 5], "solver": {"steps": 40, "local_lr": 1.6},
      "population": {"generator": "paraboloid", "clients": 3}})");
  const auto r = invoke({"--quiet", "--out", (dir / "out").string(), "run", "--config", cfg.string()});
  CHECK(r.code == ExitCode::kRuntimeFailure);
}

TEST_CASE("verify prints a table and exits 0 on success") {
  const auto r = invoke({"--quiet", "verify", "theorem2", "--trials", "200"});
  CHECK(r.code == ExitCode::kOk);
  CHECK(r.out.find("theorem2") != std::string::npos);
  CHECK(r.out.find("pass") != std::string::npos);
  CHECK(invoke({"--quiet", "verify", "lowerbound", "--trials", "2000"}).code == ExitCode::kOk);
}

TEST_CASE("sweep writes per-run and per-value tables") {
  const auto dir = scratch("sweep");
  const auto r = invoke({"--quiet", "--out", dir.string(), "sweep", "--config", kConfigDir + "/paraboloid.json",
                         "--param", "K", "--values", "1,2,4", "--seeds", "2"});
  CHECK(r.code == ExitCode::kOk);
  const auto rows = slurp(dir / "sweep.csv");
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 7);
  CHECK(fs::exists(dir / "sweep_means.csv"));
  CHECK(invoke({"sweep", "--config", kConfigDir + "/paraboloid.json", "--param", "K", "--values", ","}).code ==
        ExitCode::kConfigError);
  CHECK(invoke({"sweep", "--config", kConfigDir + "/paraboloid.json", "--param", "mu", "--values", "1"}).code ==
        ExitCode::kConfigError);
}

TEST_CASE("sweep over K lowers the mean sigma") {
  const auto dir = scratch("sweep_k");
  invoke({"--quiet", "--out", dir.string(), "sweep", "--config", kConfigDir + "/paraboloid.json",
          "--param", "K", "--values", "1,2,4,8", "--seeds", "3"});
  std::istringstream in(slurp(dir / "sweep_means.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<double> sigma;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    sigma.push_back(std::stod(cells.at(6)));
  }
  REQUIRE(sigma.size() == 4);
  for (std::size_t i = 1; i < sigma.size(); ++i) CHECK(sigma[i] < sigma[i - 1]);
}

TEST_CASE("partition exports assignments and class counts") {
  const auto dir = scratch("partition");
  std::string labels = "[";
  for (int i = 0; i < 60; ++i) labels += (i ? "," : "") + std::to_string(i % 3);
  labels += "]";
  const auto path = write(dir / "labels.json", labels);
  const auto r = invoke({"--quiet", "--seed", "4", "--out", (dir / "out").string(), "partition", "--labels",
                         path.string(), "--clients", "4", "--alpha", "0.5"});
  CHECK(r.code == ExitCode::kOk);
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "partition.json"));
  std::size_t total = 0;
  for (const auto& c : j["clients"]) total += c.size();
  CHECK(total == 60);
  CHECK(slurp(dir / "out" / "class_counts.csv").rfind("client,class_0,class_1,class_2\n", 0) == 0);
  const auto wrapped = write(dir / "wrapped.json", "{\"labels\": " + labels + "}");
  CHECK(invoke({"--quiet", "--out", (dir / "out2").string(), "partition", "--labels", wrapped.string(),
                "--clients", "2", "--alpha", "1"}).code == ExitCode::kOk);
  CHECK(invoke({"--quiet", "partition", "--labels", path.string(), "--clients", "4", "--alpha", "1",
                "--min-threshold", "40"}).code == ExitCode::kConfigError);
}

TEST_CASE("landscape exports a grid") {
  const auto dir = scratch("landscape");
  const auto r = invoke({"--quiet", "--out", dir.string(), "landscape", "--config", kConfigDir + "/paraboloid.json",
                         "--grid", "12"});
  CHECK(r.code == ExitCode::kOk);
  const auto text = slurp(dir / "landscape.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 13);
  CHECK(fs::exists(dir / "optima.csv"));
}
