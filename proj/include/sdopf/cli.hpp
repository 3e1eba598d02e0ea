#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "sdopf/assemble.hpp"
#include "sdopf/io.hpp"
#include "sdopf/report.hpp"

namespace sdopf {

/// Options shared by the batch front end and the test harness. When `enable`
/// is unset every optional constraint family is assembled — each family
/// contributes nothing unless the model carries its data (finite line limits,
/// a positive PF floor, ...), so the default solves the files as written.
struct CliOptions {
  std::string mode = "dispatch";  // dispatch | feasibility | capsweep | validate
  std::string feeder_path, scenario_path;
  std::string solution_path;  // validate mode input
  std::string out_dir;        // empty = compute only, write nothing
  double tol = 1e-7;
  double rank_threshold = 1e-5;
  std::optional<double> wv_override;        // screening weight, else scenario value
  std::optional<ConstraintFlags> enable;    // unset = all families
  double validate_tol = 1e-6;               // residual threshold for `validate`
  std::uint64_t seed = 0;                   // echoed into the report
  int log_level = 1;                        // 0 quiet, 1 info, 2 debug
  std::ostream* log = nullptr;              // default std::clog
};

/// Solve the economic dispatch relaxation and write report.json, report.csv
/// and solution.json (when out_dir is set). Exit code 0 when optimal and
/// every slot passes the rank test, 2 when solved but some slot is not tight,
/// 3 on certified infeasibility, 5 on solver failure.
RunReport cmd_dispatch(const CliOptions& opt);

/// Voltage screening: solves the penalized variant, flags every (node,
/// phase, slot) whose recovered magnitude leaves the band, and recommends
/// proceeding to dispatch iff nothing is flagged.
RunReport cmd_feasibility(const CliOptions& opt);

/// Exhaustive capacitor-switch sweep: one dispatch solve per element of the
/// Cartesian product of every node's switch_levels (solved concurrently),
/// winner = feasible configuration with the smallest objective, ties broken
/// lexicographically by level index. Report assembly is sequential, so the
/// output is deterministic.
RunReport cmd_capsweep(const CliOptions& opt);

/// Offline validation of a previously written solution file: recomputes the
/// constraint families from the stored voltages and schedules and replays
/// the fixed-point load flow. Exit 0 when every family residual stays below
/// validate_tol, 2 otherwise.
RunReport cmd_validate(const CliOptions& opt);

/// Mode switch with uniform error mapping: malformed input exits 4, numeric
/// breakdown exits 5; the report (including the error message) is still
/// written when an output directory is set.
RunReport run_cli(const CliOptions& opt);

/// Max recomputation residual per constraint family for a stored operating
/// point: power balance at load rows, generator-row balance and box bounds,
/// voltage band, deferrable energy/cap, feed anchoring, and the fixed-point
/// load-flow replay of every slot's voltages.
std::map<std::string, double> solution_residuals(const SystemMatrices& m, const FeederModel& model,
                                                 const HorizonScenario& scenario,
                                                 const StoredSolution& s);

}  // namespace sdopf
