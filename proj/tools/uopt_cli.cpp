// uopt: batch front end.
//   uopt solve    --config scenario.json [--out dir] [--seed n]
//   uopt verify   --suite name [--out dir] [--seed n]
//   uopt plotdata --report report.json [--out dir]
// Exit codes: 0 ok, 1 verification failed, 2 invalid input, 3 solver failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "uopt/scenario.hpp"
#include "uopt/suites.hpp"

namespace fs = std::filesystem;
using uopt::scenario::json;

namespace {

constexpr int kOk = 0, kVerifyFailed = 1, kInvalid = 2, kSolverFailed = 3;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw uopt::scenario::ValidationError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

int run_solve(const std::string& config, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  uopt::scenario::Scenario sc;
  try {
    json cfg;
    try {
      cfg = json::parse(read_file(config));
    } catch (const json::parse_error& e) {
      throw uopt::scenario::ValidationError(std::string("malformed JSON: ") + e.what());
    }
    if (seed && cfg.is_object()) cfg["mc"]["seed"] = *seed;
    sc = uopt::scenario::parse_scenario(cfg);
  } catch (const uopt::Error& e) {
    std::cerr << e.what() << "\n";
    return kInvalid;
  }
  const auto start = std::chrono::steady_clock::now();
  uopt::scenario::SolveOutput res;
  try {
    res = uopt::scenario::run_solve(sc);
  } catch (const uopt::Error& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverFailed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const fs::path dir(out_dir);
  write_file(dir / sc.report_file, uopt::scenario::dump_canonical(res.report));
  write_file(dir / sc.csv_file, uopt::scenario::emit_plotdata(res.report));
  for (const auto& line : res.log) std::cout << line << "\n";
  if (res.report["results"].contains("cross_solver_delta"))
    std::cout << "cross-solver delta = " << res.report["results"]["cross_solver_delta"].get<double>() << "\n";
  const auto& ver = res.report["verification"];
  if (ver.is_object()) std::cout << "supermartingale verdict: " << ver["supermartingale"]["verdict"].get<std::string>() << "\n";
  std::cout << "wrote " << (dir / sc.report_file).string() << " and " << (dir / sc.csv_file).string() << " (" << secs << " s)\n";
  return kOk;
}

int run_verify(const std::string& suite, const std::string& out_dir, std::uint64_t seed) {
  const auto& names = uopt::suite_names();
  if (std::find(names.begin(), names.end(), suite) == names.end()) {
    std::cerr << "unknown suite '" << suite << "'; known:";
    for (const auto& n : names) std::cerr << " " << n;
    std::cerr << "\n";
    return kInvalid;
  }
  uopt::SuiteResult r;
  try {
    r = uopt::run_suite(suite, seed);
  } catch (const uopt::Error& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverFailed;
  }
  json j = {{"suite", suite}, {"seed", seed}, {"version", uopt::scenario::kVersion}, {"pass", r.pass()}, {"rows", json::array()}};
  for (const auto& row : r.rows) {
    std::printf("%-4s %-60s %12.4e  (tol %.1e)\n", row.pass ? "PASS" : "FAIL", row.check.c_str(), row.value, row.tolerance);
    j["rows"].push_back({{"check", row.check}, {"value", row.value}, {"tolerance", row.tolerance}, {"pass", row.pass}});
  }
  std::printf("suite %s: %s\n", suite.c_str(), r.pass() ? "PASS" : "FAIL");
  if (!out_dir.empty()) write_file(fs::path(out_dir) / ("verify_" + suite + ".json"), uopt::scenario::dump_canonical(j));
  return r.pass() ? kOk : kVerifyFailed;
}

int run_plotdata(const std::string& report, const std::string& out_dir) {
  json rep;
  try {
    rep = json::parse(read_file(report));
  } catch (const json::parse_error& e) {
    std::cerr << "malformed report: " << e.what() << "\n";
    return kInvalid;
  } catch (const uopt::Error& e) {
    std::cerr << e.what() << "\n";
    return kInvalid;
  }
  const std::string csv = uopt::scenario::emit_plotdata(rep);
  if (out_dir.empty()) {
    std::cout << csv;
  } else {
    const fs::path p = fs::path(out_dir) / (fs::path(report).stem().string() + ".csv");
    write_file(p, csv);
    std::cout << "wrote " << p.string() << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained utility maximisation via quadratic BSDEs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", uopt::scenario::kVersion);

  std::string config, suite, report, out_dir;
  std::uint64_t seed = 0;

  auto* solve = app.add_subcommand("solve", "solve a scenario and write report + CSV");
  solve->add_option("--config", config, "scenario JSON")->required();
  solve->add_option("--out", out_dir, "output directory")->default_val(".");
  auto* solve_seed = solve->add_option("--seed", seed, "overrides mc.seed");

  auto* verify = app.add_subcommand("verify", "run a named verification suite");
  verify->add_option("--suite", suite, "merton, cones, sekine, supermartingale or dynamic")->required();
  verify->add_option("--out", out_dir, "directory for verify_<suite>.json");
  verify->add_option("--seed", seed, "suite seed")->default_val(20240601);

  auto* plot = app.add_subcommand("plotdata", "convert a report to plot-ready CSV");
  plot->add_option("--report", report, "report JSON")->required();
  plot->add_option("--out", out_dir, "output directory (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    if (*solve) return run_solve(config, out_dir, solve_seed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt);
    if (*verify) return run_verify(suite, out_dir, seed);
    if (*plot) return run_plotdata(report, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailed;
  }
  return kInvalid;
}
