#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "cli_runner.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using cema::testing::read_file;
using cema::testing::run_cli;

namespace {

fs::path scratch(const std::string &name) {
  const fs::path dir =
      fs::temp_directory_path() / ("cema_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write(const fs::path &dir, const std::string &name, const std::string &text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

const char *kPinned = R"({
  "generators": [{"a": 1, "b": 0, "c": 0, "B": 0, "p_min": 0.1, "p_max": 10}],
  "consumers": [{"w": 10, "alpha": 1, "p_min": 1, "p_max": 1}],
  "graph": {"preset": "ring"}, "weights": "uniform"
})";

const char *kLossless = R"({
  "generators": [{"a": 0.0024, "b": 5.56, "c": 30, "B": 0, "p_min": 60, "p_max": 339.69},
                 {"a": 0.0056, "b": 4.32, "c": 25, "B": 0, "p_min": 25, "p_max": 479.10}],
  "consumers": [{"w": 18.43, "alpha": 0.0545, "p_min": 50, "p_max": 100.34},
                {"w": 13.17, "alpha": 0.0877, "p_min": 100, "p_max": 159.13}],
  "graph": {"preset": "ring4"}, "weights": "uniform"
})";

} // namespace

TEST_CASE("run: corrected variant on the built-in case") {
  const fs::path dir = scratch("run_corrected");
  const auto r = run_cli("run --scenario table1 --variant corrected --output-dir " + dir.string());
  CHECK(r.status == 0);
  CHECK(r.output.find("by-tolerance") != std::string::npos);
  CHECK(fs::exists(dir / "trace_corrected.csv"));
  CHECK(fs::exists(dir / "rounds_corrected.csv"));
  const std::string summary = read_file((dir / "summary_corrected.json").string());
  CHECK(summary.find("\"mismatch\"") != std::string::npos);
  CHECK(r.output.find("implied generator prices disagree") == std::string::npos);
}

TEST_CASE("run: original variant flags the price disagreement") {
  const fs::path dir = scratch("run_original");
  const auto r = run_cli("run --scenario table1 --variant original --output-dir " + dir.string());
  CHECK(r.status == 0);
  CHECK(r.output.find("implied generator prices disagree") != std::string::npos);
}

TEST_CASE("run: failures") {
  const fs::path dir = scratch("run_fail");
  CHECK(run_cli("run --scenario /no/such/file.json --output-dir " + dir.string()).status == 1);
  CHECK(run_cli("run --scenario table1 --variant sideways").status == 1);
  CHECK(run_cli("run --scenario table1 --stride 0").status == 1);

  const auto bad = write(dir, "bad.json", R"({"generators": []})");
  const auto r = run_cli("run --scenario " + bad.string() + " --output-dir " + dir.string());
  CHECK(r.status == 1);

  std::string loss = kLossless;
  loss.replace(loss.find("\"B\": 0,"), 7, "\"B\": 0.002,");
  const auto lossy = write(dir, "lossy.json", loss);
  const auto v = run_cli("run --scenario " + lossy.string() + " --output-dir " + dir.string());
  CHECK(v.status == 1);
  CHECK(v.output.find("2B·p_max ≥ 1") != std::string::npos);

  const auto capped = run_cli("run --scenario table1 --max-iters 5 --output-dir " + dir.string());
  CHECK(capped.status == 2);
  CHECK(capped.output.find("by-max-iters") != std::string::npos);
}

TEST_CASE("solve") {
  const fs::path dir = scratch("solve");
  const auto r = run_cli("solve --scenario table1");
  CHECK(r.status == 0);
  CHECK(r.output.find("lambda*:          6.17") != std::string::npos);

  const auto pinned = run_cli("solve --scenario " + write(dir, "pinned.json", kPinned).string());
  CHECK(pinned.status == 0);
  CHECK(pinned.output.find("lambda*:          2\n") != std::string::npos);
  CHECK(pinned.output.find("P*:               (1, 1)") != std::string::npos);

  std::string infeasible = kPinned;
  infeasible.replace(infeasible.find("\"p_min\": 1, \"p_max\": 1"), 22,
                     "\"p_min\": 20, \"p_max\": 30");
  const auto inf = run_cli("solve --scenario " + write(dir, "inf.json", infeasible).string());
  CHECK(inf.status == 2);
  CHECK(run_cli("solve --scenario /no/such/file.json").status == 1);
}

TEST_CASE("kkt") {
  const fs::path dir = scratch("kkt");
  const auto ok = run_cli("kkt --scenario " + write(dir, "pinned.json", kPinned).string() +
                          " --powers 1,1 --lambda 2 --output " + (dir / "k.json").string());
  CHECK(ok.status == 0);
  CHECK(read_file((dir / "k.json").string()).find("\"certified\": true") != std::string::npos);

  const auto bad = run_cli("kkt --scenario table1 --powers 81.98,124.80,100.34,100 --lambda 5.9");
  CHECK(bad.status == 2);
  CHECK(run_cli("kkt --scenario table1 --powers 1,2 --lambda 5").status == 1);
  CHECK(run_cli("kkt --scenario table1 --powers a,b,c,d --lambda 5").status == 1);
}

TEST_CASE("counterexample") {
  const fs::path dir = scratch("counterexample");
  const auto report = dir / "report.txt";
  const auto r = run_cli("counterexample --report " + report.string());
  CHECK(r.status == 0);
  CHECK(r.output.find("(5.95, 5.72)") != std::string::npos);
  CHECK(fs::exists(report));
  CHECK(read_file((dir / "report.json").string()).find("\"outcome\": \"exhibited\"") !=
        std::string::npos);

  const auto lossless = run_cli("counterexample --scenario " +
                                write(dir, "lossless.json", kLossless).string());
  CHECK(lossless.status == 3);
  CHECK(lossless.output.find("variants coincide; no contradiction") != std::string::npos);

  const auto wild = run_cli("counterexample --eta 0.9 --max-iters 20000");
  CHECK(wild.status == 2);
  CHECK(wild.output.find("failed to converge") != std::string::npos);

  CHECK(run_cli("counterexample --scenario /no/such/file.json").status == 1);
  CHECK(run_cli("counterexample --reference 1,2,3").status == 1);
}

TEST_CASE("gen-scenario") {
  const fs::path dir = scratch("gen");
  const auto a = dir / "a.json", b = dir / "b.json";
  CHECK(run_cli("gen-scenario --seed 42 --generators 2 --consumers 2 --output " + a.string())
            .status == 0);
  CHECK(run_cli("gen-scenario --seed 42 --generators 2 --consumers 2 --output " + b.string())
            .status == 0);
  CHECK(read_file(a.string()) == read_file(b.string()));
  CHECK(run_cli("solve --scenario " + a.string()).status == 0);
  CHECK(run_cli("gen-scenario --seed 1 --output /no/such/dir/x.json").status == 1);
  CHECK(run_cli("gen-scenario --seed 1 --generators 0").status == 1);
}

TEST_CASE("no subcommand") { CHECK(run_cli("").status == 1); }
