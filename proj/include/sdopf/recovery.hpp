#pragma once

#include "sdopf/assemble.hpp"
#include "sdopf/solver.hpp"

namespace sdopf {

struct RecoveryConfig {
  double rank_threshold = 1e-5;  // lambda2/lambda1 at or below this counts as rank one
  double structure_tol = 1e-6;   // lowered-block pairing residual
  double anchor_tol = 1e-6;      // feed-phasor residual on recovered voltages
};

/// Eigenvalue ratio test. `rho` is lambda2/lambda1 with eigenvalues sorted
/// descending (infinity when lambda1 <= 0, which also fails the test);
/// `lambda1`/`u1` expose the dominant pair for the extraction step.
struct RankInfo {
  bool is_rank1 = false;
  double rho = 0.0;
  double lambda1 = 0.0;
  CVec u1;
};

/// Dispatch read off a solved relaxation. Everything is recomputed from the
/// dominant eigenpair of each slot matrix, so when `tight` is false the
/// numbers are the best rank-one approximation, not a feasible operating
/// point; `rank_ratio` says which slots to distrust.
struct DispatchSolution {
  double objective = 0.0;   // feed + generation cost recomputed from `v`
  bool tight = false;       // every slot passed the rank test
  RVec rank_ratio;          // per slot
  std::vector<CMat> X;      // per slot, recovered Hermitian matrix
  std::vector<CVec> v;      // per slot, stacked complex node voltages

  struct DgOutput {
    int unit = 0;   // index into FeederModel::dg
    int phase = 0;  // 0..2
    RVec p, q;      // per slot, generation net of nothing (load added back)
  };
  std::vector<DgOutput> dg;  // one per (unit, listed phase)

  RMat p0, q0;      // feed net import per feed phase x slot
  RMat pf0;         // feed power factor per feed phase x slot
  RMat elastic;     // deferrable-load power per load x slot (zero off-window)
  std::vector<RMat> line_current;     // per line: phase x slot magnitudes
  std::vector<RMat> neutral_current;  // per line: wire x slot (0 x T if none)
};

/// Rebuild the Hermitian matrix behind a lowered block by averaging the
/// paired sub-blocks. Throws NumericalError when the block strays from the
/// invariant structure (or is not symmetric) by more than `structure_tol`
/// relative to its magnitude.
CMat extract_hermitian(const RMat& s, double structure_tol = 1e-6);

/// See RankInfo. `x` need only be Hermitian up to round-off.
RankInfo rank1_check(const CMat& x, double threshold = 1e-5);

/// Dominant-eigenpair voltage extraction for one slot: v = sqrt(lambda1) *
/// D0 * u1, with the eigenvector phase fixed so the first feed entry is real
/// positive. Throws NumericalError when the feed block of v misses the slot's
/// phasors by more than `anchor_tol` — on a rank-one matrix that residual is
/// round-off, so a miss means the relaxation did not return a physical point.
CVec recover_voltages(const CMat& x, const SystemMatrices& m, int slot,
                      double anchor_tol = 1e-6);

/// Net injections and derived quantities at one slot, all straight from the
/// voltages: i = Yv, s_r = v_r * conj(i_r), line currents from the series
/// impedance, neutral currents through the recovery map.
struct SlotPowers {
  RVec net_p, net_q;                  // per global row
  RVec p0, q0, pf0;                   // per feed phase
  std::vector<RVec> line_current;     // per line, per phase
  std::vector<RVec> neutral_current;  // per line, per wire
};
SlotPowers recover_powers(const CVec& v, const SystemMatrices& m, const FeederModel& model);

/// Full extraction from a solved program: per-slot rank test, voltages,
/// generator outputs (net injection plus load plus deferred power on the
/// row), feed powers, power factors, currents, and the deferrable schedule
/// read from the scalar solution through the program's registry. The
/// recomputed objective prices feed and generator net injections only, so in
/// the screening mode it covers the power-cost share of the objective.
DispatchSolution recover_dispatch(const SolverResult& sol, const HermitianProgram& prog,
                                  const SystemMatrices& m, const FeederModel& model,
                                  const HorizonScenario& scenario,
                                  const RecoveryConfig& cfg = {});

}  // namespace sdopf
