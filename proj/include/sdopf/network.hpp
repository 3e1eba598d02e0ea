#pragma once

#include "sdopf/feeder.hpp"

namespace sdopf {

/// Dense row layout for the stacked per-phase voltage/current vectors:
/// nodes in file order (PCC first), phases ascending within each node.
struct IndexMap {
  std::vector<std::array<int, 3>> row;     // [node][phase] -> global row, -1 absent
  std::vector<std::pair<int, int>> owner;  // global row -> (node, phase)
  int n = 0;

  int operator()(int node, int phase) const {
    int r = row[static_cast<size_t>(node)][static_cast<size_t>(phase)];
    if (r < 0) throw InputError("no row for that (node, phase)");
    return r;
  }
  bool has(int node, int phase) const {
    return row[static_cast<size_t>(node)][static_cast<size_t>(phase)] >= 0;
  }
};

IndexMap build_index(const FeederModel& model);

/// System admittance over the stacked per-phase layout. Complex symmetric
/// (not Hermitian); i = Y v gives the net injected phase currents of the
/// π-model. Mixed-phase lines are zero-padded onto each node's phase set.
/// Throws NumericalError naming the line if a series block is singular.
CMat build_system_admittance(const FeederModel& model, const IndexMap& index);

/// PCC scaling vector a0: the PCC rows carry the slot's fixed phasors, all
/// other rows are 1. D0 = diag(a0).
CVec build_pcc_scaling(const FeederModel& model, const IndexMap& index, const CVec& pcc_phasors3);

/// Hermitian matrices turning Tr(. X) into net injected P, net injected Q and
/// squared voltage magnitude at one (node, phase) row.
struct PhiTriplet {
  CMat P, Q, V;
};

/// row = global index of the (node, phase) of interest.
PhiTriplet build_phi_triplet(const CMat& Y, const CVec& a0, int row);

/// Rank-one Hermitian matrix whose trace against X gives the squared series
/// current magnitude on one phase of a line: |[Z^-1 (v_m - v_n)]_phase|^2.
/// `phase` must belong to the line's phase set.
CMat build_line_current_matrix(const FeederModel& model, const IndexMap& index, int line_idx,
                               int phase, const CVec& a0);

/// Same for one neutral wire (requires the line's primitive ingestion:
/// t_neutral non-empty). `neutral_index` selects the wire (0-based).
CMat build_neutral_current_matrix(const FeederModel& model, const IndexMap& index, int line_idx,
                                  int neutral_index, const CVec& a0);

/// Diagonal series resistance seen by the loss form: Re(Z_mn[phase,phase]).
double line_loss_weight(const LineSegment& line, int phase);

/// Convenience: all Phi triplets for one slot, indexed by global row.
std::vector<PhiTriplet> build_all_phis(const CMat& Y, const CVec& a0);

/// Everything the per-slot quadratic forms need, precomputed for a horizon:
/// the admittance is slot-invariant, the scaling vectors and injection
/// matrices track the PCC phasors of each slot.
struct SystemMatrices {
  IndexMap index;
  CMat Y;
  std::vector<CVec> a0;                      // per slot
  std::vector<std::vector<PhiTriplet>> phi;  // [slot][global row]
};

SystemMatrices build_system_matrices(const FeederModel& model, const HorizonScenario& scenario);

}  // namespace sdopf
