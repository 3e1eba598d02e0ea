#pragma once

#include <limits>
#include <map>
#include <optional>

#include "sdopf/types.hpp"

namespace sdopf {

inline constexpr double kNoCap = std::numeric_limits<double>::infinity();

/// π-model line segment between two nodes, all quantities per-unit.
/// `z_phase` is the series impedance over the line's phase set (already
/// Kron-reduced if the input was a primitive matrix); `y_shunt` is the total
/// shunt admittance, half of which is placed at each end. `t_neutral` maps
/// phase currents to neutral-wire currents and is non-empty only when the
/// line was ingested from a primitive matrix with neutrals.
struct LineSegment {
  std::string from, to;
  PhaseSet phases;
  CMat z_phase;    // |P| x |P|
  CMat y_shunt;    // |P| x |P| (zero if absent)
  CMat t_neutral;  // #neutrals x |P| (0x0 if none)
  double i_max = kNoCap;          // per-phase current magnitude cap, kNoCap = none
  double p_loss_max = kNoCap;     // per-phase series loss cap, kNoCap = none
  double i_neutral_max = kNoCap;  // neutral current magnitude cap, kNoCap = none
};

/// Bus with its phase set, voltage band, shunt capacitor and optional
/// per-phase load power-factor floor (0 disables the constraint).
struct NodeSpec {
  std::string id;
  PhaseSet phases;
  double vmin = 0.95, vmax = 1.05;
  std::array<double, 3> cap_susceptance{0.0, 0.0, 0.0};  // per phase, >= 0
  std::vector<double> cap_switch_levels;  // optional discrete per-phase values
  double min_pf = 0.0;
};

/// Dispatchable generator: per-phase box bounds, applied on each phase listed.
struct DgUnit {
  std::string node;
  PhaseSet phases;
  double pmin = 0.0, pmax = 0.0;
  double qmin = 0.0, qmax = 0.0;
};

/// Deferrable load: `energy` (per-unit-power x hours) must be delivered on
/// one phase within slots [t_start, t_end] (1-based, inclusive), at most
/// `cap` per slot (kNoCap = unlimited).
struct ElasticLoad {
  std::string node;
  int phase = 0;
  double energy = 0.0;
  double cap = kNoCap;
  int t_start = 1, t_end = 1;
};

struct FeederModel {
  std::vector<NodeSpec> nodes;  // nodes[0] is the PCC
  std::vector<LineSegment> lines;
  std::vector<DgUnit> dg;
  std::vector<ElasticLoad> elastic;
  double base_kva = 1000.0;
  double base_kv = 4.16;  // line-to-line

  /// Index of a node id, -1 if unknown.
  int node_index(const std::string& id) const {
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == id) return static_cast<int>(i);
    return -1;
  }

  /// Base impedance in ohms; per-phase power base is base_kva/3.
  double z_base_ohm() const { return base_kv * base_kv * 1000.0 / base_kva; }
  double s_base_kva_per_phase() const { return base_kva / 3.0; }
};

/// Per-slot operating data for the whole horizon. Loads and prices are dense
/// series of length T; the PCC voltage phasors may vary per slot (one column
/// per slot). All powers per-unit on the per-phase base.
struct HorizonScenario {
  int T = 0;
  double dt_hours = 1.0;
  RVec kappa;    // PCC price per slot
  RMat dg_cost;  // one row per DG unit, T columns
  // load series keyed by node id; arrays indexed by phase, empty = zero
  std::map<std::string, std::array<RVec, 3>> load_p, load_q;
  CMat pcc_voltage;  // 3 x T phasors (rows a,b,c; entries for absent PCC phases ignored)
  double pcc_min_pf = 0.0;
  double w_v = 0.5;
  double v_ref = 1.0;

  double load(const std::map<std::string, std::array<RVec, 3>>& m, const std::string& node,
              int phase, int t) const {
    auto it = m.find(node);
    if (it == m.end()) return 0.0;
    const RVec& s = it->second[static_cast<size_t>(phase)];
    return s.size() == 0 ? 0.0 : s[t];
  }
  double p_load(const std::string& node, int phase, int t) const {
    return load(load_p, node, phase, t);
  }
  double q_load(const std::string& node, int phase, int t) const {
    return load(load_q, node, phase, t);
  }
};

/// Structural and scenario consistency checks. Returns a list of human-readable
/// violations; empty means the pair is usable. Never throws.
std::vector<std::string> validate_feeder(const FeederModel& model, const HorizonScenario& scenario);

}  // namespace sdopf
