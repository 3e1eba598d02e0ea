#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "sdopf/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-period economic dispatch for unbalanced radial feeders"};
  sdopf::CliOptions opt;
  std::string enable;
  double wv = 0.0;
  bool verbose = false;

  app.add_option("--feeder", opt.feeder_path, "Feeder description (JSON)")->required();
  app.add_option("--scenario", opt.scenario_path, "Horizon scenario (JSON)")->required();
  app.add_option("--mode", opt.mode, "dispatch | feasibility | capsweep | validate")
      ->check(CLI::IsMember({"dispatch", "feasibility", "capsweep", "validate"}))
      ->capture_default_str();
  app.add_option("--solution", opt.solution_path, "Stored solution to check (validate mode)");
  app.add_option("--out", opt.out_dir, "Directory for report.json / report.csv / solution.json");
  app.add_option("--tol", opt.tol, "Solver feasibility/gap tolerance")->capture_default_str();
  app.add_option("--rank-threshold", opt.rank_threshold,
                 "Eigenvalue-ratio bound for the per-slot rank test")
      ->capture_default_str();
  CLI::Option* wv_opt =
      app.add_option("--wv", wv, "Voltage weight for feasibility screening, in (0,1)");
  app.add_option("--validate-tol", opt.validate_tol,
                 "Residual threshold for validate mode (a relaxation-recovered point is "
                 "consistent to roughly the square root of the solver gap)")
      ->capture_default_str();
  app.add_option("--seed", opt.seed, "Seed echoed into the report")->capture_default_str();
  CLI::Option* enable_opt = app.add_option(
      "--enable", enable,
      "Comma-separated optional constraint families from thermal,neutral,pcc-pf,node-pf "
      "(default: all four)");
  app.add_flag("--verbose", verbose, "Iteration-level logging");

  CLI11_PARSE(app, argc, argv);

  if (const char* env = std::getenv("DISPATCH_LOG")) {
    const std::string v = env;
    if (v == "quiet") opt.log_level = 0;
    else if (v == "info") opt.log_level = 1;
    else if (v == "debug") opt.log_level = 2;
  }
  if (verbose) opt.log_level = 2;
  if (wv_opt->count() > 0) opt.wv_override = wv;

  if (enable_opt->count() > 0) {
    sdopf::ConstraintFlags f;
    std::stringstream ss(enable);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      if (tok == "thermal") f.thermal = true;
      else if (tok == "neutral") f.neutral = true;
      else if (tok == "pcc-pf") f.pcc_pf = true;
      else if (tok == "node-pf") f.node_pf = true;
      else {
        std::cerr << "unknown constraint family '" << tok
                  << "' (expected thermal, neutral, pcc-pf or node-pf)\n";
        return 4;
      }
    }
    opt.enable = f;
  }

  if (opt.mode == "validate" && opt.solution_path.empty()) {
    std::cerr << "validate mode needs --solution\n";
    return 4;
  }

  return sdopf::run_cli(opt).exit_code;
}
