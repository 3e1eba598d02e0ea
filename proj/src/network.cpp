#include "sdopf/network.hpp"

#include <Eigen/LU>

namespace sdopf {

IndexMap build_index(const FeederModel& model) {
  IndexMap ix;
  ix.row.assign(model.nodes.size(), {-1, -1, -1});
  for (size_t ni = 0; ni < model.nodes.size(); ++ni)
    for (int p : model.nodes[ni].phases.list()) {
      ix.row[ni][static_cast<size_t>(p)] = ix.n++;
      ix.owner.emplace_back(static_cast<int>(ni), p);
    }
  return ix;
}

namespace {

CMat invert_series(const LineSegment& ln) {
  Eigen::FullPivLU<CMat> lu(ln.z_phase);
  if (!lu.isInvertible())
    throw NumericalError("singular series impedance on line '" + ln.from + "'-'" + ln.to + "'");
  // Symmetrize so the assembled admittance is symmetric bit-for-bit.
  CMat zi = lu.inverse();
  zi = 0.5 * (zi + zi.transpose()).eval();
  return zi;
}

}  // namespace

CMat build_system_admittance(const FeederModel& model, const IndexMap& index) {
  CMat y = CMat::Zero(index.n, index.n);
  for (const LineSegment& ln : model.lines) {
    const int m = model.node_index(ln.from), n = model.node_index(ln.to);
    const std::vector<int> ph = ln.phases.list();
    const int k = static_cast<int>(ph.size());
    const CMat zinv = invert_series(ln);
    CMat diag = zinv;
    if (ln.y_shunt.size() != 0) diag += 0.25 * (ln.y_shunt + ln.y_shunt.transpose());
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        const int rm = index(m, ph[static_cast<size_t>(a)]),
                  rn = index(n, ph[static_cast<size_t>(b)]);
        const int rm2 = index(m, ph[static_cast<size_t>(b)]),
                  rn2 = index(n, ph[static_cast<size_t>(a)]);
        y(rm, rm2) += diag(a, b);
        y(rn2, rn) += diag(a, b);
        y(rm, rn) -= zinv(a, b);
        y(rn2, rm2) -= zinv(a, b);
      }
  }
  return y;
}

CVec build_pcc_scaling(const FeederModel& model, const IndexMap& index, const CVec& pcc_phasors3) {
  CVec a0 = CVec::Ones(index.n);
  for (int p : model.nodes[0].phases.list()) a0[index(0, p)] = pcc_phasors3[p];
  return a0;
}

PhiTriplet build_phi_triplet(const CMat& Y, const CVec& a0, int row) {
  const int n = static_cast<int>(Y.rows());
  if (row < 0 || row >= n) throw InputError("phi row out of range");
  // D0^H e_r fills u; (row r of Y) * D0, conjugated, fills w. Then
  // D0^H Y_n D0 = u w^H, a rank-one cross on row/column r.
  CVec u = CVec::Zero(n);
  u[row] = std::conj(a0[row]);
  const CVec w = (Y.row(row).transpose().array() * a0.array()).conjugate();
  PhiTriplet phi;
  phi.P = 0.5 * (u * w.adjoint() + w * u.adjoint());
  phi.Q = 0.5 * kImag * (u * w.adjoint() - w * u.adjoint());
  phi.V = CMat::Zero(n, n);
  phi.V(row, row) = std::norm(a0[row]);
  return phi;
}

namespace {

/// Rows of B = Z^-1 (selector at m - selector at n) for one line.
CMat line_current_map(const FeederModel& model, const IndexMap& index, const LineSegment& ln) {
  const int m = model.node_index(ln.from), n = model.node_index(ln.to);
  const std::vector<int> ph = ln.phases.list();
  const int k = static_cast<int>(ph.size());
  const CMat zinv = invert_series(ln);
  CMat b = CMat::Zero(k, index.n);
  for (int a = 0; a < k; ++a)
    for (int c = 0; c < k; ++c) {
      b(a, index(m, ph[static_cast<size_t>(c)])) += zinv(a, c);
      b(a, index(n, ph[static_cast<size_t>(c)])) -= zinv(a, c);
    }
  return b;
}

CMat rank_one_from_row(const CVec& a0, const Eigen::RowVectorXcd& brow) {
  const CVec g = (brow.transpose().array() * a0.array()).conjugate();
  return g * g.adjoint();
}

}  // namespace

CMat build_line_current_matrix(const FeederModel& model, const IndexMap& index, int line_idx,
                               int phase, const CVec& a0) {
  const LineSegment& ln = model.lines.at(static_cast<size_t>(line_idx));
  const int local = ln.phases.index_of(phase);
  if (local < 0)
    throw InputError("phase " + std::string(1, phase_letter(phase)) + " not on line '" + ln.from +
                     "'-'" + ln.to + "'");
  const CMat b = line_current_map(model, index, ln);
  return rank_one_from_row(a0, b.row(local));
}

CMat build_neutral_current_matrix(const FeederModel& model, const IndexMap& index, int line_idx,
                                  int neutral_index, const CVec& a0) {
  const LineSegment& ln = model.lines.at(static_cast<size_t>(line_idx));
  if (ln.t_neutral.rows() == 0)
    throw InputError("line '" + ln.from + "'-'" + ln.to +
                     "' has no neutral transform (primitive impedance required)");
  if (neutral_index < 0 || neutral_index >= ln.t_neutral.rows())
    throw InputError("neutral index out of range");
  const CMat b = ln.t_neutral.row(neutral_index) * line_current_map(model, index, ln);
  return rank_one_from_row(a0, b.row(0));
}

double line_loss_weight(const LineSegment& line, int phase) {
  const int local = line.phases.index_of(phase);
  if (local < 0) throw InputError("phase not on line");
  return line.z_phase(local, local).real();
}

std::vector<PhiTriplet> build_all_phis(const CMat& Y, const CVec& a0) {
  std::vector<PhiTriplet> phis;
  phis.reserve(static_cast<size_t>(Y.rows()));
  for (int r = 0; r < Y.rows(); ++r) phis.push_back(build_phi_triplet(Y, a0, r));
  return phis;
}

SystemMatrices build_system_matrices(const FeederModel& model, const HorizonScenario& scenario) {
  SystemMatrices m;
  m.index = build_index(model);
  m.Y = build_system_admittance(model, m.index);
  m.a0.reserve(static_cast<size_t>(scenario.T));
  m.phi.reserve(static_cast<size_t>(scenario.T));
  for (int t = 0; t < scenario.T; ++t) {
    m.a0.push_back(build_pcc_scaling(model, m.index, scenario.pcc_voltage.col(t)));
    m.phi.push_back(build_all_phis(m.Y, m.a0.back()));
  }
  return m;
}

}  // namespace sdopf
