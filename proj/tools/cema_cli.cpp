// Command-line driver for libcema. Uses only the C interface.
//
// Exit codes: 0 success, 1 invalid input, 2 infeasible / not converged /
// not certified, 3 no contradiction (counterexample only).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cema/cema.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitFailed = 2;
constexpr int kExitNoContradiction = 3;

template <class T, void (*Free)(T *)> struct Deleter {
  void operator()(T *p) const { Free(p); }
};
using ScenarioPtr = std::unique_ptr<cema_scenario, Deleter<cema_scenario, cema_scenario_free>>;
using RunPtr = std::unique_ptr<cema_run, Deleter<cema_run, cema_run_free>>;
using KktPtr = std::unique_ptr<cema_kkt_report, Deleter<cema_kkt_report, cema_kkt_free>>;
using CounterexamplePtr =
    std::unique_ptr<cema_counterexample, Deleter<cema_counterexample, cema_counterexample_free>>;
using StringPtr = std::unique_ptr<char, Deleter<char, cema_string_free>>;

class CliError : public std::runtime_error {
public:
  CliError(int code, const std::string &msg) : std::runtime_error(msg), code_(code) {}
  int code() const { return code_; }

private:
  int code_;
};

void check(cema_status st, const std::string &context) {
  if (st == CEMA_OK)
    return;
  const int code = st == CEMA_ERR_INFEASIBLE ? kExitFailed : kExitInvalid;
  throw CliError(code, context + ": " + cema_last_error());
}

std::string take(char *s) {
  StringPtr holder(s);
  return s ? std::string(s) : std::string();
}

void write_file(const std::filesystem::path &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os)
    throw CliError(kExitInvalid, "cannot write '" + path.string() + "'");
}

struct Overrides {
  std::optional<double> eta;
  std::optional<double> eps_m;
  std::optional<double> eps_l;
  std::optional<std::size_t> max_iters;

  void attach(CLI::App *cmd) {
    cmd->add_option("--eta", eta, "Surplus gain, 0 < eta < 1");
    cmd->add_option("--eps-m", eps_m, "Surplus termination tolerance");
    cmd->add_option("--eps-l", eps_l, "Price termination tolerance");
    cmd->add_option("--max-iters", max_iters, "Iteration cap");
  }

  void apply(cema_scenario *s) const {
    if (eta)
      check(cema_scenario_set_eta(s, *eta), "--eta");
    if (eps_m)
      check(cema_scenario_set_eps_m(s, *eps_m), "--eps-m");
    if (eps_l)
      check(cema_scenario_set_eps_l(s, *eps_l), "--eps-l");
    if (max_iters)
      check(cema_scenario_set_max_iters(s, *max_iters), "--max-iters");
  }
};

/// Loads, applies overrides and validates. Violations go to stderr.
ScenarioPtr load_valid(const std::string &path, const Overrides &ov = {}) {
  cema_scenario *raw = nullptr;
  check(cema_scenario_load(path.c_str(), &raw), "scenario");
  ScenarioPtr s(raw);
  ov.apply(s.get());

  std::size_t count = 0;
  char *messages = nullptr;
  check(cema_scenario_validate(s.get(), &count, &messages), "validate");
  const std::string text = take(messages);
  if (count > 0)
    throw CliError(kExitInvalid, "invalid scenario '" + path + "':\n" + text);
  return s;
}

std::vector<double> parse_list(const std::string &text, const char *what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                          : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size())
        throw std::invalid_argument(item);
    } catch (const std::exception &) {
      throw CliError(kExitInvalid, std::string(what) + ": cannot parse '" + item + "'");
    }
    if (comma == std::string::npos)
      break;
    pos = comma + 1;
  }
  return out;
}

std::string join(const std::vector<double> &xs) {
  std::string out;
  char buf[40];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g", xs[i]);
    out += (i ? ", " : "") + std::string(buf);
  }
  return out;
}

// ---- run ----

struct RunConfig {
  std::string scenario_path;
  std::string variant = "corrected";
  std::string output_dir = ".";
  std::size_t trace_stride = 1;
  Overrides overrides;
};

int cmd_run(const RunConfig &cfg) {
  ScenarioPtr s = load_valid(cfg.scenario_path, cfg.overrides);
  std::vector<cema_variant> variants;
  if (cfg.variant == "original" || cfg.variant == "both")
    variants.push_back(CEMA_VARIANT_ORIGINAL);
  if (cfg.variant == "corrected" || cfg.variant == "both")
    variants.push_back(CEMA_VARIANT_CORRECTED);

  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw CliError(kExitInvalid, "cannot create output directory '" + dir.string() + "'");

  int status = kExitOk;
  for (const auto v : variants) {
    const std::string name = v == CEMA_VARIANT_ORIGINAL ? "original" : "corrected";
    cema_run *raw = nullptr;
    check(cema_run_execute(s.get(), v, cfg.trace_stride, &raw), "run");
    RunPtr r(raw);

    const auto trace = dir / ("trace_" + name + ".csv");
    const auto rounds = dir / ("rounds_" + name + ".csv");
    if (cema_run_write_trace(r.get(), trace.string().c_str(), rounds.string().c_str()) != CEMA_OK)
      throw CliError(kExitInvalid, cema_last_error());

    char *json = nullptr, *text = nullptr;
    check(cema_run_summary(r.get(), &json, &text), "summary");
    write_file(dir / ("summary_" + name + ".json"), take(json));
    std::cout << take(text) << "trace:          " << trace.string() << "\n\n";

    if (cema_run_termination(r.get()) != CEMA_TERMINATED_BY_TOLERANCE)
      status = kExitFailed;
  }
  return status;
}

// ---- solve ----

int cmd_solve(const std::string &path, double tol) {
  ScenarioPtr s = load_valid(path);
  std::vector<double> P(cema_scenario_node_count(s.get()));
  cema_solution_info info{};
  check(cema_solve(s.get(), tol, P.data(), P.size(), &info), "solve");
  std::cout << "lambda*:          " << info.lambda << "\n"
            << "P*:               (" << join(P) << ")\n"
            << "objective:        " << info.objective << "\n"
            << "balance residual: " << info.balance_residual << "\n"
            << "KKT max residual: " << info.kkt_max_residual << "\n";
  return info.kkt_max_residual <= 1e-6 ? kExitOk : kExitFailed;
}

// ---- kkt ----

int cmd_kkt(const std::string &path, const std::string &powers, double lambda, double tol,
            const std::string &output) {
  ScenarioPtr s = load_valid(path);
  const auto P = parse_list(powers, "--powers");
  if (P.size() != cema_scenario_node_count(s.get()))
    throw CliError(kExitInvalid, "--powers needs one value per node (" +
                                     std::to_string(cema_scenario_node_count(s.get())) + ")");
  cema_kkt_report *raw = nullptr;
  check(cema_kkt_check(s.get(), P.data(), P.size(), lambda, tol, &raw), "kkt");
  KktPtr report(raw);
  char *json = nullptr;
  check(cema_kkt_to_json(report.get(), &json), "kkt");
  const std::string text = take(json);
  if (output.empty())
    std::cout << text;
  else
    write_file(output, text);
  std::cerr << "max residual " << cema_kkt_max_residual(report.get())
            << (cema_kkt_certified(report.get()) ? " (certified)" : " (not certified)") << "\n";
  return cema_kkt_certified(report.get()) ? kExitOk : kExitFailed;
}

// ---- counterexample ----

int cmd_counterexample(const std::string &path, const std::string &report_path,
                       const std::string &reference, const Overrides &ov) {
  ScenarioPtr s = load_valid(path, ov);

  std::vector<double> ref;
  if (!reference.empty()) {
    ref = parse_list(reference, "--reference");
  } else if (path == "table1") {
    ref.resize(cema_table1_reference_dispatch(nullptr, 0));
    cema_table1_reference_dispatch(ref.data(), ref.size());
  }

  cema_counterexample *raw = nullptr;
  const cema_status st = cema_counterexample_analyze(s.get(), ref.empty() ? nullptr : ref.data(),
                                                     ref.size(), &raw);
  if (st != CEMA_OK)
    throw CliError(kExitInvalid, std::string("counterexample: ") + cema_last_error());
  CounterexamplePtr c(raw);

  char *json = nullptr, *text = nullptr;
  check(cema_counterexample_report(c.get(), &json, &text), "report");
  const std::string json_text = take(json), report_text = take(text);
  std::cout << report_text;
  if (!report_path.empty()) {
    std::filesystem::path p(report_path);
    write_file(p, report_text);
    write_file(std::filesystem::path(p).replace_extension(".json"), json_text);
  }

  switch (cema_counterexample_result(c.get())) {
  case CEMA_CONTRADICTION_EXHIBITED:
    return kExitOk;
  case CEMA_CONTRADICTION_NOT_CONVERGED:
    return kExitFailed;
  case CEMA_CONTRADICTION_NONE:
    break;
  }
  return kExitNoContradiction;
}

// ---- gen-scenario ----

int cmd_gen_scenario(std::uint64_t seed, std::size_t generators, std::size_t consumers,
                     const std::string &output) {
  cema_scenario *raw = nullptr;
  check(cema_scenario_generate(seed, generators, consumers, &raw), "gen-scenario");
  ScenarioPtr s(raw);
  char *json = nullptr;
  check(cema_scenario_to_json(s.get(), &json), "gen-scenario");
  const std::string text = take(json);
  if (output.empty() || output == "-")
    std::cout << text;
  else
    write_file(output, text);
  return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Consensus-based energy management simulator and dispatch oracle"};
  app.require_subcommand(1);

  RunConfig run_cfg;
  auto *run = app.add_subcommand("run", "Run the distributed iteration and write traces");
  run->add_option("--scenario", run_cfg.scenario_path, "Scenario JSON file or 'table1'")
      ->required();
  run->add_option("--variant", run_cfg.variant, "original | corrected | both")
      ->check(CLI::IsMember({"original", "corrected", "both"}));
  run->add_option("--output-dir", run_cfg.output_dir, "Directory for traces and summaries");
  run->add_option("--stride", run_cfg.trace_stride, "Record every N-th round")
      ->check(CLI::PositiveNumber);
  run_cfg.overrides.attach(run);

  std::string solve_path;
  double solve_tol = 1e-10;
  auto *solve = app.add_subcommand("solve", "Solve the centralized dispatch problem");
  solve->add_option("--scenario", solve_path, "Scenario JSON file or 'table1'")->required();
  solve->add_option("--tol", solve_tol, "Balance tolerance of the price bisection");

  std::string kkt_path, kkt_powers, kkt_output;
  double kkt_lambda = 0.0, kkt_tol = 1e-6;
  auto *kkt = app.add_subcommand("kkt", "Certify a dispatch against the optimality conditions");
  kkt->add_option("--scenario", kkt_path, "Scenario JSON file or 'table1'")->required();
  kkt->add_option("--powers", kkt_powers, "Comma-separated power per node")->required();
  kkt->add_option("--lambda", kkt_lambda, "Balance multiplier")->required();
  kkt->add_option("--tol", kkt_tol, "Certification tolerance");
  kkt->add_option("--output", kkt_output, "Write the JSON report here instead of stdout");

  std::string cx_path = "table1", cx_report, cx_reference;
  Overrides cx_overrides;
  auto *cx = app.add_subcommand("counterexample",
                                "Run both variants and the oracle; check the contradiction");
  cx->add_option("--scenario", cx_path, "Scenario JSON file or 'table1' (default)");
  cx->add_option("--report", cx_report, "Text report path; JSON sidecar uses .json");
  cx->add_option("--reference", cx_reference,
                 "Comma-separated generator powers to evaluate implied prices at");
  cx_overrides.attach(cx);

  std::uint64_t gen_seed = 0;
  std::size_t gen_generators = 2, gen_consumers = 2;
  std::string gen_output;
  auto *gen = app.add_subcommand("gen-scenario", "Write a random valid, feasible scenario");
  gen->add_option("--seed", gen_seed, "RNG seed")->required();
  gen->add_option("--generators", gen_generators, "Generator count")->check(CLI::PositiveNumber);
  gen->add_option("--consumers", gen_consumers, "Consumer count")->check(CLI::PositiveNumber);
  gen->add_option("--output", gen_output, "Output path ('-' or empty for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (run->parsed())
      return cmd_run(run_cfg);
    if (solve->parsed())
      return cmd_solve(solve_path, solve_tol);
    if (kkt->parsed())
      return cmd_kkt(kkt_path, kkt_powers, kkt_lambda, kkt_tol, kkt_output);
    if (cx->parsed())
      return cmd_counterexample(cx_path, cx_report, cx_reference, cx_overrides);
    if (gen->parsed())
      return cmd_gen_scenario(gen_seed, gen_generators, gen_consumers, gen_output);
  } catch (const CliError &e) {
    std::cerr << e.what() << "\n";
    return e.code();
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
