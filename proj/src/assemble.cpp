#include "sdopf/assemble.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace sdopf {
namespace {

template <class... A>
std::string cat(A&&... a) {
  std::ostringstream os;
  (os << ... << a);
  return os.str();
}

// Unit covering each global row, -1 = bare. A row carries at most one unit,
// and the feed node cannot host one — its injection is already free.
std::vector<int> unit_of_row(const FeederModel& model, const IndexMap& ix) {
  std::vector<int> owner(static_cast<size_t>(ix.n), -1);
  for (size_t u = 0; u < model.dg.size(); ++u) {
    const DgUnit& dg = model.dg[u];
    int nd = model.node_index(dg.node);
    if (nd < 0) throw InputError("unknown generator node '" + dg.node + "'");
    if (nd == 0)
      throw InputError("generator at the feed node '" + dg.node + "' is not supported");
    for (int ph : dg.phases.list()) {
      if (!ix.has(nd, ph))
        throw InputError(cat("generator at '", dg.node, "' uses absent phase ", phase_letter(ph)));
      size_t r = static_cast<size_t>(ix(nd, ph));
      if (owner[r] >= 0)
        throw InputError(cat("two generators cover node '", dg.node, "' phase ", phase_letter(ph)));
      owner[r] = static_cast<int>(u);
    }
  }
  return owner;
}

HermitianProgram::Row& new_row(HermitianProgram& p, int slot, std::vector<CxEntry> cx, double rhs,
                               RowKind kind, const char* tag) {
  HermitianProgram::Row r;
  if (!cx.empty()) r.cx.push_back({slot, std::move(cx)});
  r.rhs = rhs;
  r.kind = kind;
  r.tag = tag;
  r.group = slot;
  p.rows.push_back(std::move(r));
  return p.rows.back();
}

RMat aux2(double a00, double a01, double a11) {
  RMat a(2, 2);
  a << a00, a01, a01, a11;
  return a;
}

enum class Mode { Dispatch, Feasibility };

HermitianProgram assemble_core(const SystemMatrices& m, const FeederModel& model,
                               const HorizonScenario& sc, const ConstraintFlags& flags,
                               Mode mode) {
  const IndexMap& ix = m.index;
  const int T = sc.T;
  if (T <= 0) throw InputError("scenario has no slots");
  if (static_cast<int>(m.a0.size()) != T || static_cast<int>(m.phi.size()) != T)
    throw InputError(cat("inconsistent scenario length: matrices cover ", m.a0.size(),
                         " slots, scenario has ", T));
  if (sc.kappa.size() != T)
    throw InputError(cat("feed price series has ", sc.kappa.size(), " entries, expected ", T));
  if (!model.dg.empty() && (sc.dg_cost.rows() != static_cast<Eigen::Index>(model.dg.size()) ||
                            sc.dg_cost.cols() != T))
    throw InputError("generator cost table must have one row per unit and one column per slot");
  if (mode == Mode::Feasibility && !(sc.w_v > 0.0 && sc.w_v < 1.0))
    throw InputError(cat("voltage weight must lie strictly inside (0,1), got ", sc.w_v));

  HermitianProgram p;
  p.n = ix.n;
  p.T = T;

  const std::vector<int> dg_row = unit_of_row(model, ix);

  // Elastic powers exist only on their window slots; remember which rows they
  // feed so the balance/box rows below can pick them up.
  p.pbar.assign(model.elastic.size(), std::vector<int>(static_cast<size_t>(T), -1));
  std::vector<std::vector<int>> elastic_at(static_cast<size_t>(ix.n));
  for (size_t d = 0; d < model.elastic.size(); ++d) {
    const ElasticLoad& el = model.elastic[d];
    int nd = model.node_index(el.node);
    if (nd < 0) throw InputError("unknown elastic-load node '" + el.node + "'");
    if (el.t_start < 1 || el.t_end > T || el.t_start > el.t_end)
      throw InputError(cat("elastic window [", el.t_start, ",", el.t_end,
                           "] falls outside the horizon 1..", T));
    if (!ix.has(nd, el.phase))
      throw InputError(cat("elastic load at '", el.node, "' uses absent phase ",
                           phase_letter(el.phase)));
    elastic_at[static_cast<size_t>(ix(nd, el.phase))].push_back(static_cast<int>(d));
    for (int t = el.t_start - 1; t < el.t_end; ++t)
      p.pbar[d][static_cast<size_t>(t)] = p.add_scalar(cat("pbar:d", d, ":t", t + 1), t);
  }

  const int n0 = model.nodes[0].phases.count();
  std::vector<int> alphas;

  for (int t = 0; t < T; ++t) {
    const std::vector<PhiTriplet>& phis = m.phi[static_cast<size_t>(t)];

    // Feed-point anchoring: the scaled feed block of X is the all-ones matrix.
    for (int i = 0; i < n0; ++i)
      for (int j = i; j < n0; ++j) {
        if (i == j) {
          new_row(p, t, {{i, j, Complex(1, 0)}}, 1.0, RowKind::Eq, "anchor");
        } else {
          new_row(p, t, {{i, j, Complex(1, 0)}}, 2.0, RowKind::Eq, "anchor");
          new_row(p, t, {{i, j, kImag}}, 0.0, RowKind::Eq, "anchor");
        }
      }

    // Power balance at bare rows, box bounds at generator rows. Elastic
    // powers ride on the active side of both.
    for (int r = n0; r < ix.n; ++r) {
      const auto [nd, ph] = ix.owner[static_cast<size_t>(r)];
      const NodeSpec& ns = model.nodes[static_cast<size_t>(nd)];
      const double p_l = sc.p_load(ns.id, ph, t);
      const double q_l = sc.q_load(ns.id, ph, t);
      const double y_c = ns.cap_susceptance[static_cast<size_t>(ph)];
      const PhiTriplet& f = phis[static_cast<size_t>(r)];

      std::vector<std::pair<int, double>> lins;
      for (int d : elastic_at[static_cast<size_t>(r)])
        if (int s = p.pbar[static_cast<size_t>(d)][static_cast<size_t>(t)]; s >= 0)
          lins.push_back({s, 1.0});

      CMat qc = f.Q;  // capacitor support scales with the squared voltage
      if (y_c != 0.0) qc -= y_c * f.V;

      if (dg_row[static_cast<size_t>(r)] < 0) {
        new_row(p, t, dense_to_cx(f.P), -p_l, RowKind::Eq, "balance_p").lin = lins;
        new_row(p, t, dense_to_cx(qc), -q_l, RowKind::Eq, "balance_q");
      } else {
        const DgUnit& u = model.dg[static_cast<size_t>(dg_row[static_cast<size_t>(r)])];
        new_row(p, t, dense_to_cx(f.P), u.pmax - p_l, RowKind::Le, "dg_p_hi").lin = lins;
        auto& lo = new_row(p, t, dense_to_cx(CMat(-f.P)), p_l - u.pmin, RowKind::Le, "dg_p_lo");
        for (const auto& [s, c] : lins) lo.lin.push_back({s, -c});
        new_row(p, t, dense_to_cx(f.Q), u.qmax - q_l, RowKind::Le, "dg_q_hi");
        new_row(p, t, dense_to_cx(CMat(-f.Q)), q_l - u.qmin, RowKind::Le, "dg_q_lo");
      }
    }

    if (mode == Mode::Dispatch) {
      // Squared voltage band on every non-feed row.
      for (int r = n0; r < ix.n; ++r) {
        const NodeSpec& ns = model.nodes[static_cast<size_t>(ix.owner[static_cast<size_t>(r)].first)];
        const CMat& fv = phis[static_cast<size_t>(r)].V;
        new_row(p, t, dense_to_cx(fv), ns.vmax * ns.vmax, RowKind::Le, "vband_hi");
        new_row(p, t, dense_to_cx(CMat(-fv)), -(ns.vmin * ns.vmin), RowKind::Le, "vband_lo");
      }
    } else {
      // Deviation slack per non-feed row: a 2x2 block [[alpha, d],[d, 1]] >= 0
      // with d = Tr(Phi_V X) - vref^2 makes alpha an upper bound on d^2.
      for (int r = n0; r < ix.n; ++r) {
        const int a = p.add_scalar(cat("alpha:r", r, ":t", t + 1), t);
        alphas.push_back(a);
        const int zb = p.add_aux_block(t);
        auto& link = new_row(p, t, {}, 0.0, RowKind::Eq, "schur_link");
        link.aux.push_back({zb, aux2(1, 0, 0)});
        link.lin.push_back({a, -1.0});
        new_row(p, t, {}, 1.0, RowKind::Eq, "schur_corner").aux.push_back({zb, aux2(0, 0, 1)});
        auto& dev = new_row(p, t, dense_to_cx(CMat(-phis[static_cast<size_t>(r)].V)),
                            -(sc.v_ref * sc.v_ref), RowKind::Eq, "schur_v");
        dev.aux.push_back({zb, aux2(0, 0.5, 0)});
      }
    }

    // Per-slot elastic caps.
    for (size_t d = 0; d < model.elastic.size(); ++d)
      if (int s = p.pbar[d][static_cast<size_t>(t)]; s >= 0 && std::isfinite(model.elastic[d].cap))
        new_row(p, t, {}, model.elastic[d].cap, RowKind::Le, "cap").lin.push_back({s, 1.0});
  }

  // Energy delivery couples the window slots of each elastic load.
  for (size_t d = 0; d < model.elastic.size(); ++d) {
    const ElasticLoad& el = model.elastic[d];
    HermitianProgram::Row row;
    row.kind = RowKind::Eq;
    row.tag = "energy";
    row.group = -1;
    row.rhs = el.energy;
    for (int t = el.t_start - 1; t < el.t_end; ++t)
      row.lin.push_back({p.pbar[d][static_cast<size_t>(t)], sc.dt_hours});
    p.rows.push_back(std::move(row));
  }

  if (flags.thermal) add_thermal_constraints(p, m, model);
  if (flags.neutral) add_neutral_constraints(p, m, model);
  if (flags.pcc_pf) add_pcc_pf_constraints(p, m, model, sc);
  if (flags.node_pf) add_node_pf_constraints(p, m, model, sc);

  // Net injection priced at the feed rows and at every generator row.
  p.obj.assign(static_cast<size_t>(T), CMat::Zero(ix.n, ix.n));
  for (int t = 0; t < T; ++t) {
    CMat& o = p.obj[static_cast<size_t>(t)];
    for (int i = 0; i < n0; ++i) o += sc.kappa[t] * m.phi[static_cast<size_t>(t)][static_cast<size_t>(i)].P;
    for (size_t u = 0; u < model.dg.size(); ++u) {
      const int nd = model.node_index(model.dg[u].node);
      for (int ph : model.dg[u].phases.list())
        o += sc.dg_cost(static_cast<Eigen::Index>(u), t) *
             m.phi[static_cast<size_t>(t)][static_cast<size_t>(ix(nd, ph))].P;
    }
  }
  if (mode == Mode::Feasibility) {
    for (CMat& o : p.obj) o *= sc.w_v;
    for (int a : alphas) p.obj_lin.push_back({a, 1.0 - sc.w_v});
  }
  return p;
}

}  // namespace

HermitianProgram assemble_dispatch(const SystemMatrices& m, const FeederModel& model,
                                   const HorizonScenario& scenario, const ConstraintFlags& flags) {
  return assemble_core(m, model, scenario, flags, Mode::Dispatch);
}

HermitianProgram assemble_feasibility(const SystemMatrices& m, const FeederModel& model,
                                      const HorizonScenario& scenario,
                                      const ConstraintFlags& flags) {
  return assemble_core(m, model, scenario, flags, Mode::Feasibility);
}

void add_thermal_constraints(HermitianProgram& p, const SystemMatrices& m,
                             const FeederModel& model) {
  const int T = static_cast<int>(m.a0.size());
  for (size_t li = 0; li < model.lines.size(); ++li) {
    const LineSegment& ln = model.lines[li];
    const bool want_i = std::isfinite(ln.i_max);
    const bool want_loss = std::isfinite(ln.p_loss_max);
    if (!want_i && !want_loss) continue;
    if ((want_i && ln.i_max <= 0.0) || (want_loss && ln.p_loss_max <= 0.0))
      throw InputError(cat("line ", ln.from, "-", ln.to, " has a non-positive limit"));
    for (int ph : ln.phases.list()) {
      const double rw = want_loss ? line_loss_weight(ln, ph) : 0.0;
      for (int t = 0; t < T; ++t) {
        const CMat fi = build_line_current_matrix(model, m.index, static_cast<int>(li), ph,
                                                  m.a0[static_cast<size_t>(t)]);
        if (want_i)
          new_row(p, t, dense_to_cx(fi), ln.i_max * ln.i_max, RowKind::Le, "thermal_i");
        if (want_loss)
          new_row(p, t, dense_to_cx(CMat(rw * fi)), ln.p_loss_max, RowKind::Le, "thermal_loss");
      }
    }
  }
}

void add_neutral_constraints(HermitianProgram& p, const SystemMatrices& m,
                             const FeederModel& model) {
  const int T = static_cast<int>(m.a0.size());
  for (size_t li = 0; li < model.lines.size(); ++li) {
    const LineSegment& ln = model.lines[li];
    if (!std::isfinite(ln.i_neutral_max)) continue;
    if (ln.i_neutral_max <= 0.0)
      throw InputError(cat("line ", ln.from, "-", ln.to, " has a non-positive neutral limit"));
    if (ln.t_neutral.size() == 0)
      throw InputError(cat("line ", ln.from, "-", ln.to,
                           " has a neutral current cap but no neutral recovery data"));
    for (Eigen::Index w = 0; w < ln.t_neutral.rows(); ++w)
      for (int t = 0; t < T; ++t) {
        const CMat fn = build_neutral_current_matrix(model, m.index, static_cast<int>(li),
                                                     static_cast<int>(w),
                                                     m.a0[static_cast<size_t>(t)]);
        new_row(p, t, dense_to_cx(fn), ln.i_neutral_max * ln.i_neutral_max, RowKind::Le,
                "neutral_i");
      }
  }
}

void add_pcc_pf_constraints(HermitianProgram& p, const SystemMatrices& m,
                            const FeederModel& model, const HorizonScenario& scenario) {
  const double eta = scenario.pcc_min_pf;
  if (eta == 0.0) return;
  if (!(eta > 0.0 && eta <= 1.0))
    throw InputError(cat("feed power-factor floor must lie in [0,1], got ", eta));
  // |Q| <= P * tan(acos(eta)) as two one-sided rows; eta = 1 pins Q to zero.
  const double slope = std::sqrt(1.0 - eta * eta) / eta;
  const int T = static_cast<int>(m.a0.size());
  const int n0 = model.nodes[0].phases.count();
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < n0; ++i) {
      const PhiTriplet& f = m.phi[static_cast<size_t>(t)][static_cast<size_t>(i)];
      new_row(p, t, dense_to_cx(CMat(f.Q - slope * f.P)), 0.0, RowKind::Le, "pcc_pf_lag");
      new_row(p, t, dense_to_cx(CMat(-f.Q - slope * f.P)), 0.0, RowKind::Le, "pcc_pf_lead");
    }
}

void add_node_pf_constraints(HermitianProgram& p, const SystemMatrices& m,
                             const FeederModel& model, const HorizonScenario& scenario) {
  const int T = static_cast<int>(m.a0.size());
  const IndexMap& ix = m.index;
  const int n0 = model.nodes[0].phases.count();
  for (int r = n0; r < ix.n; ++r) {
    const auto [nd, ph] = ix.owner[static_cast<size_t>(r)];
    const NodeSpec& ns = model.nodes[static_cast<size_t>(nd)];
    if (ns.min_pf <= 0.0) continue;
    if (ns.min_pf > 1.0)
      throw InputError(cat("node '", ns.id, "' power-factor floor must lie in [0,1]"));
    const double y_c = ns.cap_susceptance[static_cast<size_t>(ph)];
    for (int t = 0; t < T; ++t) {
      const double p_l = scenario.p_load(ns.id, ph, t);
      const double q_l = scenario.q_load(ns.id, ph, t);
      if (p_l <= 0.0)
        throw InputError(cat("node '", ns.id, "' phase ", phase_letter(ph), " slot ", t + 1,
                             ": power factor undefined without active load"));
      // 2x2 block [[(P_L/pf)^2, d],[d, 1]] >= 0 bounds the net reactive draw
      // d = P_L + Q_L - y_C Tr(Phi_V X).
      const double bound = p_l / ns.min_pf;
      const int zb = p.add_aux_block(t);
      new_row(p, t, {}, bound * bound, RowKind::Eq, "node_pf_corner")
          .aux.push_back({zb, aux2(1, 0, 0)});
      new_row(p, t, {}, 1.0, RowKind::Eq, "node_pf_unit").aux.push_back({zb, aux2(0, 0, 1)});
      std::vector<CxEntry> cx;
      if (y_c != 0.0) cx = dense_to_cx(CMat(y_c * m.phi[static_cast<size_t>(t)][static_cast<size_t>(r)].V));
      new_row(p, t, std::move(cx), p_l + q_l, RowKind::Eq, "node_pf_link")
          .aux.push_back({zb, aux2(0, 0.5, 0)});
    }
  }
}

}  // namespace sdopf
