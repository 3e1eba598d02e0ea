#pragma once

#include "sdopf/network.hpp"

namespace sdopf {

/// Fixed-point load flow over the stacked per-phase layout.
///
/// The first `n_pcc` rows of Y carry the fixed phasors `v_pcc`; `s_rest` holds
/// the complex net power injections at the remaining rows (generation minus
/// consumption, per-unit). Iterates
///   v <- Y22^-1 (conj(s / v) - Y21 v_pcc)
/// from the no-load solution until the voltage update drops below `tol`, then
/// verifies every per-row power mismatch is below 10*tol.
/// Returns the full voltage vector (PCC rows included).
/// Throws NumericalError on divergence, reporting the last mismatch.
CVec zbus_fixed_point(const CMat& Y, int n_pcc, const CVec& v_pcc, const CVec& s_rest,
                      double tol = 1e-10, int max_iter = 200);

/// Largest per-row power mismatch |v_r conj((Yv)_r) - s_r| over non-PCC rows.
double power_mismatch(const CMat& Y, int n_pcc, const CVec& v, const CVec& s_rest);

/// Grid density for the exhaustive tiny-case search.
struct BruteForceGrid {
  int n_mag = 61;          // magnitude samples per searched row
  int n_ang = 61;          // angle samples per searched row
  double ang_span = 0.3;   // radians each side of the PCC angle
  double balance_tol = 0;  // acceptable |net injection + load| at rows without a generator;
                           // 0 = derive from grid spacing
  double box_slack = 0.0;  // slack on generator box bounds
};

/// One slot of the exhaustive search.
struct BruteForceSlot {
  bool feasible = false;
  double objective = 0.0;
  CVec v;         // full stacked voltages at the optimum
  RVec p_gen;     // per-row recovered generation (0 where no unit)
  RVec q_gen;
  double mag_step = 0.0;  // grid resolution actually used
  double ang_step = 0.0;
};

struct BruteForceResult {
  bool feasible = false;
  double objective = 0.0;
  std::vector<BruteForceSlot> slots;
};

/// Exhaustive optimal dispatch for feeders with at most two non-PCC
/// (node, phase) rows and no elastic loads. Grids voltage magnitude within
/// each node's band and angle around the PCC phase reference; a candidate is
/// feasible when every generator row's implied dispatch falls inside its box
/// and every bare load row balances within `balance_tol`. Cost prices the net
/// injection at the PCC rows with kappa and at generator rows with the unit
/// cost, matching the dispatch objective exactly. Slots are independent.
BruteForceResult brute_force_opf(const FeederModel& model, const HorizonScenario& scenario,
                                 const BruteForceGrid& grid = {});

}  // namespace sdopf
