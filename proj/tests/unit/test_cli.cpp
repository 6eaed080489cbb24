#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = SPLITSTREAM_CLI;

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("splitstream_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args, const fs::path& dir) {
  const auto log = dir / "stdout.txt";
  const std::string cmd = kCli + " " + args + " > " + log.string() + " 2> " + (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

}  // namespace

TEST_CASE("monte carlo run writes a valid report") {
  const auto dir = scratch_dir("mc");
  const std::string args = "mc --system kse --n 4 --repetitions 2 --grid-runs 8 --n-thresholds 3 --seed 5 --out-dir ";
  const auto r = run(args + (dir / "a").string(), dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("p_mean") != std::string::npos);
  const auto rep = load(dir / "a" / "estimate_report.json");
  CHECK(rep["method"] == "MC");
  CHECK(rep["n_repetitions"] == 2);
  CHECK(rep["n_realizations_each"] == 4);
  CHECK(rep["threshold"] == 2.0);
  CHECK(rep["per_threshold"].size() == 4);  // headline plus the grid
  CHECK(fs::exists(dir / "a" / "probability_curve.csv"));
  CHECK(load(dir / "a" / "config.json")["command"] == "mc");

  // Same seed, same bytes.
  REQUIRE(run(args + (dir / "b").string(), dir).code == 0);
  CHECK(slurp(dir / "a" / "estimate_report.json") == slurp(dir / "b" / "estimate_report.json"));
  fs::remove_all(dir);
}

TEST_CASE("lyapunov command reports a positive exponent for lorenz 96") {
  const auto dir = scratch_dir("lyap");
  const auto r = run("lyapunov --system l96 --n-renorm 200 --seed 1 --out-dir " + dir.string(), dir);
  REQUIRE(r.code == 0);
  const auto j = load(dir / "lyapunov.json");
  CHECK(j["lambda1"].get<double>() > 0.0);
  CHECK(j["checkpoints"].get<int>() >= 64);
  fs::remove_all(dir);
}

TEST_CASE("splitting with a baseline writes gain files") {
  const auto dir = scratch_dir("gams");
  const std::string common =
      " --system l96 --n 20 --repetitions 3 --grid-runs 40 --n-thresholds 2 --seed 3 --threshold 1300 ";
  REQUIRE(run("mc" + common + "--out-dir " + (dir / "mc").string(), dir).code == 0);
  const auto r = run("gams" + common + "--target-runs 20 --lambda-w 1 --baseline " +
                         (dir / "mc" / "estimate_report.json").string() + " --out-dir " + (dir / "g").string(),
                     dir);
  REQUIRE(r.code == 0);
  for (const char* f : {"splitting_report.json", "clone_distances.csv", "estimate_report.json",
                        "probability_curve.csv", "gain_curve.csv", "gain_summary.json"})
    CHECK(fs::exists(dir / "g" / f));
  const auto split = load(dir / "g" / "splitting_report.json");
  CHECK(split["strategy"] == "random");
  CHECK(split["checkpoints"].size() == 63);
  const auto summary = load(dir / "g" / "gain_summary.json");
  CHECK(summary["threshold"] == 1300.0);

  const auto g = run("gain --mc " + (dir / "mc" / "estimate_report.json").string() + " --split " +
                         (dir / "g" / "estimate_report.json").string() + " --out-dir " + (dir / "gain").string(),
                     dir);
  REQUIRE(g.code == 0);
  const std::string status = summary["status"];
  if (status == "gain")
    CHECK(g.out.rfind("gain ", 0) == 0);
  else
    CHECK(g.out.rfind(status, 0) == 0);
  CHECK(fs::exists(dir / "gain" / "gain_curve.csv"));
  fs::remove_all(dir);
}

TEST_CASE("a single large MC run serves as the gain reference") {
  const auto dir = scratch_dir("reference");
  REQUIRE(run("mc --system l96 --n 400 --repetitions 1 --threshold 1300 --thresholds 1300 --seed 2 --out-dir " +
                  (dir / "mc").string(),
              dir)
              .code == 0);
  CHECK(load(dir / "mc" / "estimate_report.json")["n_repetitions"] == 1);
  const auto r = run("gams --system l96 --n 20 --repetitions 3 --target-runs 20 --threshold 1300 --thresholds 1300 "
                     "--baseline " +
                         (dir / "mc" / "estimate_report.json").string() + " --out-dir " + (dir / "g").string(),
                     dir);
  REQUIRE(r.code == 0);
  const auto summary = load(dir / "g" / "gain_summary.json");
  CHECK(summary["threshold"] == 1300.0);
  CHECK(summary["status"].is_string());
  fs::remove_all(dir);
}

TEST_CASE("collect writes the dataset and its index") {
  const auto dir = scratch_dir("collect");
  const auto r = run("collect --system kse --runs 2 --per-run 2 --holdout 1 --seed 4 --out-dir " + dir.string(), dir);
  REQUIRE(r.code == 0);
  const auto idx = load(dir / "dataset_index.json");
  CHECK(idx["n_rows"] == 4);
  CHECK(idx["holdout_row_indices"].size() == 1);
  std::ifstream in(dir / "dataset.csv");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  CHECK(lines == 5);
  fs::remove_all(dir);
}

TEST_CASE("config file with flag precedence") {
  const auto dir = scratch_dir("config");
  std::ofstream(dir / "c.json") << R"({"system": "kse", "n": 3, "repetitions": 2, "grid_runs": 4, "master_seed": 9})";
  const auto r = run("mc --config " + (dir / "c.json").string() + " --n 5 --out-dir " + (dir / "o").string(), dir);
  REQUIRE(r.code == 0);
  const auto echoed = load(dir / "o" / "config.json");
  CHECK(echoed["n"] == 5);
  CHECK(echoed["repetitions"] == 2);
  CHECK(echoed["master_seed"] == 9);
  CHECK(echoed["system"] == "kse");

  REQUIRE(run("mc --system l96 --n 3 --repetitions 2 --thresholds 1000,1100 --out-dir " + (dir / "t").string(), dir)
              .code == 0);
  const auto rep = load(dir / "t" / "estimate_report.json");
  REQUIRE(rep["per_threshold"].size() == 3);
  CHECK(rep["per_threshold"][0]["a"] == 1300.0);
  CHECK(rep["per_threshold"][2]["a"] == 1100.0);

  std::ofstream(dir / "bad.json") << R"({"nn": 3})";
  CHECK(run("mc --config " + (dir / "bad.json").string() + " --out-dir " + (dir / "o").string(), dir).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("exit codes") {
  const auto dir = scratch_dir("codes");
  CHECK(run("", dir).code == 2);
  CHECK(run("frobnicate", dir).code == 2);
  CHECK(run("mc --system pendulum", dir).code == 2);
  CHECK(run("mc --n notanumber", dir).code == 2);
  CHECK(run("gams --system kse --clone-strategy ganisp --out-dir " + dir.string(), dir).code == 2);
  CHECK(run("gams --system kse --clone-strategy ganisp --weights " + (dir / "absent.json").string() +
                " --out-dir " + dir.string(),
            dir)
            .code == 4);
  CHECK(run("gain --mc " + (dir / "absent.json").string() + " --split x --out-dir " + dir.string(), dir).code == 4);
  CHECK(run("collect --system kse --runs 1 --per-run 12 --out-dir " + dir.string(), dir).code == 2);
  CHECK(run("mc --help", dir).code == 0);
  fs::remove_all(dir);
}

TEST_CASE("generative cloning runs from a weights manifest") {
  const auto dir = scratch_dir("ganisp");
  const fs::path weights = fs::path(SPLITSTREAM_FIXTURE_DIR) / "two_layer.json";
  const auto r = run("gams --system kse --n 8 --repetitions 1 --target-runs 8 --grid-runs 8 --n-thresholds 1 "
                     "--clone-strategy ganisp --pso-particles 16 --pso-iterations 3 --weights " +
                         weights.string() + " --out-dir " + dir.string(),
                     dir);
  REQUIRE(r.code == 0);
  const auto rep = load(dir / "splitting_report.json");
  CHECK(rep["strategy"] == "ganisp");
  CHECK(rep["checkpoints"].size() == 44);
  fs::remove_all(dir);
}
