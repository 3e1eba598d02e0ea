#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sdopf/types.hpp"

namespace sdopf {

/// Everything one front-end run produces. Powers are reported in kW/kVAr
/// (internal math is per-unit); voltages stay per-unit. The report is a pure
/// function of the inputs and the seed — `wall_ms` is the one exception and
/// is therefore logged but never serialized.
struct RunReport {
  std::string mode;    // dispatch | feasibility | capsweep | validate
  std::string status;  // optimal | infeasible | unbounded | iteration_limit |
                       // numerical_failure | input_error | valid | flagged
  int exit_code = 0;   // 0 optimal+tight, 2 solved-but-not-tight/flagged,
                       // 3 infeasible, 4 input error, 5 solver failure
  bool tight = false;
  double objective = 0.0;  // price units x per-unit power, summed over slots
  int solver_iterations = 0;
  double wall_ms = 0.0;
  std::vector<std::string> messages;

  // config echo
  std::string feeder_path, scenario_path;
  double tol = 0.0, rank_threshold = 0.0, w_v = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> enabled;  // constraint families assembled

  // recovered schedule; empty when the solve produced no operating point
  RVec rank_ratio;                  // per slot
  std::vector<char> pcc_phase;      // label per feed row
  RMat p0_kw, q0_kvar, pf0;         // feed phase x slot
  struct DgSchedule {
    int unit = 0;
    std::string node;
    char phase = 'a';
    RVec p_kw, q_kvar;  // per slot
  };
  std::vector<DgSchedule> dg;
  RMat elastic_kw;                  // deferrable load x slot
  RVec volt_min_pu, volt_max_pu;    // per-slot extremes over all rows
  std::map<std::string, double> residuals;  // family -> max residual

  // feasibility screening
  struct VoltageFlag {
    std::string node;
    char phase = 'a';
    int slot = 0;   // 1-based
    double vmag = 0.0;
  };
  std::vector<VoltageFlag> flags;
  bool recommend_dispatch = false;

  // capacitor sweep
  struct ConfigResult {
    std::vector<int> level_index;      // chosen level per switched node
    std::vector<double> level_value;   // per-unit susceptance per switched node
    std::string status;
    double objective = 0.0;
    bool tight = false;
  };
  std::vector<ConfigResult> configs;
  std::vector<std::string> switched_nodes;
  int best_config = -1;
};

/// Deterministic serializations: identical report structs give identical
/// bytes. The CSV is the fixed-column schedule table (one row per slot and
/// feed phase): slot, phase, p_pcc_kw, q_pcc_kvar, pf_pcc, per-DG p_kw /
/// q_kvar pairs, rank_ratio, vmin_pu, vmax_pu.
std::string report_json(const RunReport& r);
std::string report_csv(const RunReport& r);

/// Writes report.json and report.csv into `out_dir` (created if missing).
void write_report_files(const RunReport& r, const std::string& out_dir);

}  // namespace sdopf
