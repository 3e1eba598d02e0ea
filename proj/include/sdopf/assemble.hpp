#pragma once

#include "sdopf/network.hpp"
#include "sdopf/program.hpp"

namespace sdopf {

struct ConstraintFlags {
  bool thermal = false;
  bool neutral = false;
  bool pcc_pf = false;
  bool node_pf = false;
};

/// Economic dispatch relaxation over the horizon: per-slot Hermitian blocks
/// anchored at the feed point, power balance at bare rows, box constraints at
/// generator rows, voltage-band rows, elastic energy/cap coupling, and the
/// optional line/PF families per flags. Objective prices net PCC injection at
/// kappa and net generator-row injection at the unit cost.
HermitianProgram assemble_dispatch(const SystemMatrices& m, const FeederModel& model,
                                   const HorizonScenario& scenario,
                                   const ConstraintFlags& flags = {});

/// Voltage-screening variant: the voltage-band rows are dropped; instead each
/// non-feed row gets a deviation bound alpha >= (Tr(Phi_V X) - vref^2)^2 via a
/// 2x2 slack block, and the objective trades (1 - w_v) * sum(alpha) against
/// w_v times the dispatch objective. Requires w_v in (0,1).
HermitianProgram assemble_feasibility(const SystemMatrices& m, const FeederModel& model,
                                      const HorizonScenario& scenario,
                                      const ConstraintFlags& flags = {});

/// Squared line-current caps and per-phase conductor loss caps for every line
/// carrying finite limits; lines with no limit contribute nothing.
void add_thermal_constraints(HermitianProgram& p, const SystemMatrices& m,
                             const FeederModel& model);

/// Squared current caps on eliminated neutral wires; a finite limit on a line
/// without neutral recovery data is an error naming the line.
void add_neutral_constraints(HermitianProgram& p, const SystemMatrices& m,
                             const FeederModel& model);

/// Two one-sided reactive bounds per feed phase and slot keeping the feed
/// power factor above scenario.pcc_min_pf; a zero floor adds nothing.
void add_pcc_pf_constraints(HermitianProgram& p, const SystemMatrices& m,
                            const FeederModel& model, const HorizonScenario& scenario);

/// Per-row minimum load power factor with capacitor support, as one 2x2 slack
/// block per (row, slot): (P_L + Q_L - y_C Tr(Phi_V X))^2 <= (P_L / pf_min)^2.
void add_node_pf_constraints(HermitianProgram& p, const SystemMatrices& m,
                             const FeederModel& model, const HorizonScenario& scenario);

}  // namespace sdopf
