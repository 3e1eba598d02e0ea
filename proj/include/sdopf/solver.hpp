#pragma once

#include <iosfwd>

#include "sdopf/program.hpp"

namespace sdopf {

struct SolverConfig {
  double tol = 1e-7;            // relative feasibility / gap tolerance
  int max_iter = 200;
  double step_fraction = 0.98;  // fraction of the distance to the cone boundary
  double static_reg = 0.0;      // relative diagonal shift of the normal system;
                                // 0 keeps it exact and shifts only on breakdown
  bool verbose = false;
  std::ostream* log = nullptr;  // iteration lines go here when verbose (default std::clog)
};

enum class SolveStatus {
  Optimal,
  PrimalInfeasible,
  DualInfeasible,
  IterationLimit,
  NumericalFailure,
};

const char* to_string(SolveStatus s);

struct IterationStats {
  int iter = 0;
  double mu = 0, rel_p = 0, rel_d = 0, rel_g = 0;
  double step = 0, sigma = 0, tau = 0, kappa = 0;
  double primal_obj = 0, dual_obj = 0;  // candidate objectives c.x/tau, b.y/tau
  double rgap = 0;                      // signed (b.y - c.x - kappa)/tau
};

/// Interior-point outcome. On Optimal the candidate (blocks, scalars, dual)
/// is the solution; on PrimalInfeasible `dual`/`dual_blocks`/`dual_scalars`
/// hold a Farkas-type ray (b.dual > 0, -A'dual conic); on DualInfeasible
/// `blocks`/`scalars` hold an unbounded primal ray (A.ray = 0, c.ray < 0).
struct SolverResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  std::vector<RMat> blocks;       // primal PSD blocks
  RVec scalars;                   // nonnegative scalars
  RVec dual;                      // one multiplier per row, original row order
  std::vector<RMat> dual_blocks;  // dual slack blocks
  RVec dual_scalars;
  double objective = 0.0;
  int iterations = 0;
  double rel_primal = 0, rel_dual = 0, rel_gap = 0, mu = 0;
  std::vector<IterationStats> trace;
};

/// Path-following solve of the block conic program in equality form.
/// Infeasibility is detected through the homogeneous embedding rather than by
/// divergence, so contradictory constraints report cleanly. Deterministic:
/// rows are canonicalized internally, so any permutation of the input rows
/// yields the same iterates.
SolverResult solve(const ConicProgram& p, const SolverConfig& cfg = {});

}  // namespace sdopf
