#include "sdopf/loadflow.hpp"

#include <Eigen/LU>
#include <sstream>

namespace sdopf {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace

double power_mismatch(const CMat& Y, int n_pcc, const CVec& v, const CVec& s_rest) {
  const CVec i = Y * v;
  double worst = 0.0;
  for (int r = n_pcc; r < v.size(); ++r)
    worst = std::max(worst, std::abs(v[r] * std::conj(i[r]) - s_rest[r - n_pcc]));
  return worst;
}

CVec zbus_fixed_point(const CMat& Y, int n_pcc, const CVec& v_pcc, const CVec& s_rest, double tol,
                      int max_iter) {
  const int n = static_cast<int>(Y.rows());
  if (Y.cols() != n) throw InputError("admittance matrix must be square");
  if (n_pcc < 1 || n_pcc >= n) throw InputError("need at least one fixed and one free row");
  if (v_pcc.size() != n_pcc || s_rest.size() != n - n_pcc)
    throw InputError("fixed-phasor / injection sizes do not match the partition");

  const int nr = n - n_pcc;
  const CMat y21 = Y.block(n_pcc, 0, nr, n_pcc);
  const Eigen::FullPivLU<CMat> lu(Y.block(n_pcc, n_pcc, nr, nr));
  if (!lu.isInvertible()) throw NumericalError("free sub-block of Y is singular");

  const CVec b0 = y21 * v_pcc;
  CVec vr = lu.solve(-b0);  // no-load solution

  CVec full(n);
  full.head(n_pcc) = v_pcc;
  full.tail(nr) = vr;
  double mismatch = power_mismatch(Y, n_pcc, full, s_rest);

  for (int it = 0; it < max_iter && !(mismatch < 10 * tol); ++it) {
    const CVec i_inj = (s_rest.array() / vr.array()).conjugate();
    const CVec vn = lu.solve(i_inj - b0);
    const double delta = (vn - vr).lpNorm<Eigen::Infinity>();
    vr = vn;
    full.tail(nr) = vr;
    mismatch = power_mismatch(Y, n_pcc, full, s_rest);
    if (delta < tol) break;
  }
  if (!(mismatch < 10 * tol))
    throw NumericalError("load flow did not converge; last mismatch " + fmt(mismatch));
  return full;
}

namespace {

struct SearchRow {
  int row = -1;
  int node = -1;
  int phase = -1;
  int dg = -1;  // unit index, -1 for a bare load row
  double vmin = 0, vmax = 0;
  double ang_ref = 0;
};

}  // namespace

BruteForceResult brute_force_opf(const FeederModel& model, const HorizonScenario& scenario,
                                 const BruteForceGrid& grid) {
  const IndexMap ix = build_index(model);
  const CMat y = build_system_admittance(model, ix);
  const int n_pcc = model.nodes[0].phases.count();
  const int nr = ix.n - n_pcc;
  if (nr > 2) throw InputError("exhaustive search supports at most two free rows");
  if (!model.elastic.empty()) throw InputError("exhaustive search does not schedule elastic loads");
  if (grid.n_mag < 1 || grid.n_ang < 1) throw InputError("grid must have at least one sample");

  std::vector<SearchRow> rows(static_cast<size_t>(nr));
  for (int r = 0; r < nr; ++r) {
    SearchRow& sr = rows[static_cast<size_t>(r)];
    sr.row = n_pcc + r;
    sr.node = ix.owner[static_cast<size_t>(sr.row)].first;
    sr.phase = ix.owner[static_cast<size_t>(sr.row)].second;
    sr.vmin = model.nodes[static_cast<size_t>(sr.node)].vmin;
    sr.vmax = model.nodes[static_cast<size_t>(sr.node)].vmax;
    for (size_t u = 0; u < model.dg.size(); ++u) {
      const DgUnit& dg = model.dg[u];
      if (model.node_index(dg.node) == sr.node && dg.phases.has(sr.phase)) {
        if (sr.dg >= 0) throw InputError("exhaustive search allows one unit per row");
        sr.dg = static_cast<int>(u);
      }
    }
  }

  BruteForceResult out;
  out.feasible = true;
  out.slots.resize(static_cast<size_t>(scenario.T));

  const double ynorm = y.cwiseAbs().rowwise().sum().maxCoeff();

  for (int t = 0; t < scenario.T; ++t) {
    BruteForceSlot& slot = out.slots[static_cast<size_t>(t)];

    CVec v_pcc(n_pcc);
    {
      const std::vector<int> ph = model.nodes[0].phases.list();
      for (int p = 0; p < n_pcc; ++p) v_pcc[p] = scenario.pcc_voltage(ph[static_cast<size_t>(p)], t);
    }
    for (SearchRow& sr : rows)
      sr.ang_ref = model.nodes[0].phases.has(sr.phase)
                       ? std::arg(scenario.pcc_voltage(sr.phase, t))
                       : 0.0;

    slot.mag_step = grid.n_mag > 1
                        ? (rows.empty() ? 0.0 : (rows[0].vmax - rows[0].vmin) / (grid.n_mag - 1))
                        : 0.0;
    slot.ang_step = grid.n_ang > 1 ? 2.0 * grid.ang_span / (grid.n_ang - 1) : 0.0;
    const double balance_tol =
        grid.balance_tol > 0
            ? grid.balance_tol
            : 3.0 * ynorm * (slot.mag_step + (rows.empty() ? 0.0 : rows[0].vmax) * slot.ang_step);

    const CVec i_base = y.leftCols(n_pcc) * v_pcc;
    const long per_row = static_cast<long>(grid.n_mag) * grid.n_ang;
    long total = 1;
    for (int r = 0; r < nr; ++r) total *= per_row;

    double best_key = std::numeric_limits<double>::infinity();
    double best = 0.0;
    CVec best_v;
    RVec best_p, best_q;

    // Weight that makes a unit of residual imbalance at a bare load row cost
    // more than any saving it could buy, so balanced candidates always win.
    double w_bal = 2.0 * std::abs(scenario.kappa[t]) + 1.0;
    for (size_t u = 0; u < model.dg.size(); ++u)
      w_bal += 2.0 * std::abs(scenario.dg_cost(static_cast<int>(u), t));

    CVec v_full(ix.n);
    v_full.head(n_pcc) = v_pcc;

    for (long c = 0; c < total; ++c) {
      long rem = c;
      CVec i = i_base;
      bool in_band = true;
      for (const SearchRow& sr : rows) {
        const long k = rem % per_row;
        rem /= per_row;
        const int im = static_cast<int>(k % grid.n_mag);
        const int ia = static_cast<int>(k / grid.n_mag);
        const double mag = grid.n_mag > 1 ? sr.vmin + im * (sr.vmax - sr.vmin) / (grid.n_mag - 1)
                                          : 0.5 * (sr.vmin + sr.vmax);
        if (sr.vmin > sr.vmax) {
          in_band = false;
          break;
        }
        const double ang = grid.n_ang > 1 ? sr.ang_ref - grid.ang_span + ia * slot.ang_step
                                          : sr.ang_ref;
        const Complex vv = std::polar(mag, ang);
        v_full[sr.row] = vv;
        i += y.col(sr.row) * vv;
      }
      if (!in_band) continue;

      bool ok = true;
      double cost = 0.0, imbalance = 0.0;
      RVec pg = RVec::Zero(ix.n), qg = RVec::Zero(ix.n);
      for (const SearchRow& sr : rows) {
        const Complex s = v_full[sr.row] * std::conj(i[sr.row]);
        const std::string& nid = model.nodes[static_cast<size_t>(sr.node)].id;
        const Complex gen = s + Complex(scenario.p_load(nid, sr.phase, t),
                                        scenario.q_load(nid, sr.phase, t));
        if (sr.dg >= 0) {
          const DgUnit& dg = model.dg[static_cast<size_t>(sr.dg)];
          if (gen.real() < dg.pmin - grid.box_slack || gen.real() > dg.pmax + grid.box_slack ||
              gen.imag() < dg.qmin - grid.box_slack || gen.imag() > dg.qmax + grid.box_slack) {
            ok = false;
            break;
          }
          cost += scenario.dg_cost(sr.dg, t) * s.real();
          pg[sr.row] = gen.real();
          qg[sr.row] = gen.imag();
        } else if (std::abs(gen) > balance_tol) {
          ok = false;
          break;
        } else {
          imbalance += std::abs(gen);
        }
      }
      if (!ok) continue;
      for (int p = 0; p < n_pcc; ++p)
        cost += scenario.kappa[t] * (v_pcc[p] * std::conj(i[p])).real();
      const double key = cost + w_bal * imbalance;
      if (key < best_key) {
        best_key = key;
        best = cost;
        best_v = v_full;
        best_p = pg;
        best_q = qg;
      }
    }

    slot.feasible = std::isfinite(best_key);
    if (slot.feasible) {
      slot.objective = best;
      slot.v = best_v;
      slot.p_gen = best_p;
      slot.q_gen = best_q;
      out.objective += best;
    } else {
      out.feasible = false;
    }
  }
  return out;
}

}  // namespace sdopf
