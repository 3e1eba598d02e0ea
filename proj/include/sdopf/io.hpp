#pragma once

#include <string>

#include "sdopf/feeder.hpp"
#include "sdopf/recovery.hpp"

namespace sdopf {

/// Feeder description ingest. JSON schema:
///   {
///     "bases": {"kva": 5000, "kv": 4.16},          // optional, defaults 1000 / 4.16
///     "nodes": [
///       {"id": "0", "phases": "abc",
///        "vmin": 0.95, "vmax": 1.05,                // optional band, per-unit
///        "capacitor": {"susceptance_per_phase": 0.04,   // scalar or [3], per-unit
///                      "switch_levels": [0, 0.02, 0.04]},
///        "min_pf": 0.9},                            // optional load PF floor
///       ...                                         // nodes[0] is the feed point
///     ],
///     "lines": [
///       {"from": "0", "to": "1", "phases": "abc",
///        "primitive_z": [[[r,x], ...], ...],        // (|P|+neutrals)^2, OHMS
///        "neutrals": 1,                             // trailing wire count
///        "z_phase": [[[r,x], ...], ...],            // |P|^2, per-unit (alternative)
///        "y_shunt": [[[g,b], ...], ...],            // optional, |P|^2, per-unit
///        "i_max": 1.2, "p_loss_max": 0.05,          // optional per-unit caps
///        "i_neutral_max": 0.3},
///       ...
///     ],
///     "dg": [{"node": "1", "phases": "b",
///             "pmin": 0, "pmax": 0.18, "qmin": 0, "qmax": 0}],   // per-unit
///     "elastic": [{"node": "9", "phase": "a", "energy_kwh": 30,
///                  "cap_kw": 4, "window": [15, 23]}]             // cap optional
///   }
/// Exactly one of primitive_z / z_phase per line. primitive_z is given in ohms
/// and converted on the feeder's impedance base, then Kron-reduced; z_phase and
/// y_shunt are already per-unit. Elastic energy/cap convert from kWh/kW on the
/// per-phase power base (kva/3). Complex entries are [re, im] pairs (a bare
/// number is taken as real). Malformed input throws InputError naming the spot.
FeederModel parse_feeder(const std::string& json_text);
FeederModel load_feeder(const std::string& path);

/// Horizon scenario ingest. JSON schema:
///   {
///     "T": 24, "dt_hours": 1.0,
///     "kappa": [...T...],                         // feed price per slot
///     "dg_cost": [[...T...], ...],                // one row per DG unit
///     "loads": {"9": {"a": {"p": [...T...], "q": [...T...]}, ...}, ...},  // per-unit
///     "pcc": {"vmag": 1.02, "angles_deg": [0, 120, -120]},  // vmag scalar or [3]
///     "pcc_min_pf": 0.8,                          // optional, default 0 (off)
///     "w_v": 0.5, "v_ref": 1.0                    // optional screening knobs
///   }
/// The feed phasors are held constant across the horizon. T must be >= 1.
HorizonScenario parse_scenario(const std::string& json_text);
HorizonScenario load_scenario(const std::string& path);

/// Solved operating point as stored on disk (all quantities per-unit).
/// Written by the dispatch front end, read back for offline validation.
struct StoredSolution {
  double objective = 0.0;
  bool tight = false;
  RVec rank_ratio;         // per slot
  std::vector<CVec> v;     // per slot, stacked node voltages
  struct Dg {
    int unit = 0;
    int phase = 0;
    RVec p, q;             // per slot
  };
  std::vector<Dg> dg;
  RMat elastic;            // load x slot (0 x T when none)
  RMat p0, q0, pf0;        // feed phase x slot
};

/// Lossy projection of a recovered dispatch onto the stored form (drops the
/// slot matrices and current profiles, keeps everything validation needs).
StoredSolution to_stored(const DispatchSolution& d);

std::string solution_to_json(const StoredSolution& s);
void write_solution_file(const std::string& path, const StoredSolution& s);
StoredSolution load_solution(const std::string& path);

}  // namespace sdopf
