#include "sdopf/recovery.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace sdopf {

namespace {

template <class... A>
std::string cat(A&&... a) {
  std::ostringstream os;
  (os << ... << a);
  return os.str();
}

}  // namespace

CMat extract_hermitian(const RMat& s, double structure_tol) {
  if (s.rows() != s.cols() || s.rows() % 2 != 0)
    throw InputError("lowered block must be square with even dimension");
  const int n = static_cast<int>(s.rows()) / 2;
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  const double sym = (s - s.transpose()).cwiseAbs().maxCoeff();
  const double pair = (s.topLeftCorner(n, n) - s.bottomRightCorner(n, n)).cwiseAbs().maxCoeff();
  const double skew = (s.topRightCorner(n, n) + s.bottomLeftCorner(n, n)).cwiseAbs().maxCoeff();
  const double res = std::max({sym, pair, skew});
  if (res > structure_tol * scale)
    throw NumericalError(cat("lowered block violates the pairing structure: residual ", res,
                             " on magnitude ", scale));
  const RMat re = 0.5 * (s.topLeftCorner(n, n) + s.bottomRightCorner(n, n));
  const RMat im = 0.5 * (s.bottomLeftCorner(n, n) - s.topRightCorner(n, n));
  CMat x = re.cast<Complex>() + kImag * im.cast<Complex>();
  x = 0.5 * (x + x.adjoint()).eval();  // exact Hermiticity
  return x;
}

RankInfo rank1_check(const CMat& x, double threshold) {
  RankInfo info;
  Eigen::SelfAdjointEigenSolver<CMat> eig(x);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in rank test");
  const int n = static_cast<int>(x.rows());
  info.lambda1 = eig.eigenvalues()(n - 1);
  info.u1 = eig.eigenvectors().col(n - 1);
  if (!(info.lambda1 > 0.0)) {
    info.rho = std::numeric_limits<double>::infinity();
    info.is_rank1 = false;
    return info;
  }
  const double l2 = n > 1 ? std::abs(eig.eigenvalues()(n - 2)) : 0.0;
  info.rho = l2 / info.lambda1;
  info.is_rank1 = info.rho <= threshold;
  return info;
}

CVec recover_voltages(const CMat& x, const SystemMatrices& m, int slot, double anchor_tol) {
  if (slot < 0 || slot >= static_cast<int>(m.a0.size()))
    throw InputError(cat("slot ", slot, " out of range"));
  const CVec& a0 = m.a0[static_cast<size_t>(slot)];
  if (x.rows() != a0.size())
    throw InputError(cat("slot matrix dimension ", x.rows(), " does not match the layout ",
                         a0.size()));
  const RankInfo info = rank1_check(x, std::numeric_limits<double>::infinity());
  if (!(info.lambda1 > 0.0)) throw NumericalError("slot matrix has no positive eigenvalue");

  CVec xv = std::sqrt(info.lambda1) * info.u1;
  // fix the eigenvector's free phase against the first feed entry
  const Complex lead = xv(0);
  if (std::abs(lead) > 0.0) xv *= std::conj(lead) / std::abs(lead);
  const CVec v = a0.cwiseProduct(xv);

  double worst = 0.0;
  for (int r = 0; r < v.size(); ++r) {
    if (m.index.owner[static_cast<size_t>(r)].first != 0) break;
    worst = std::max(worst, std::abs(v(r) - a0(r)));
  }
  if (worst > anchor_tol)
    throw NumericalError(cat("recovered feed voltage misses the fixed phasor by ", worst,
                             "; the relaxation did not return a physical point"));
  return v;
}

SlotPowers recover_powers(const CVec& v, const SystemMatrices& m, const FeederModel& model) {
  SlotPowers out;
  const int n = static_cast<int>(v.size());
  const CVec i = m.Y * v;
  out.net_p.resize(n);
  out.net_q.resize(n);
  for (int r = 0; r < n; ++r) {
    const Complex s = v(r) * std::conj(i(r));
    out.net_p(r) = s.real();
    out.net_q(r) = s.imag();
  }

  int n0 = 0;
  while (n0 < n && m.index.owner[static_cast<size_t>(n0)].first == 0) ++n0;
  out.p0 = out.net_p.head(n0);
  out.q0 = out.net_q.head(n0);
  out.pf0.resize(n0);
  for (int r = 0; r < n0; ++r) {
    const double apparent = std::hypot(out.p0(r), out.q0(r));
    out.pf0(r) = apparent > 0.0 ? out.p0(r) / apparent : 1.0;
  }

  for (size_t l = 0; l < model.lines.size(); ++l) {
    const LineSegment& ln = model.lines[l];
    const std::vector<int> ph = ln.phases.list();
    const int k = static_cast<int>(ph.size());
    const int mfrom = model.node_index(ln.from), mto = model.node_index(ln.to);
    CVec diff(k);
    for (int a = 0; a < k; ++a)
      diff(a) = v(m.index(mfrom, ph[static_cast<size_t>(a)])) -
                v(m.index(mto, ph[static_cast<size_t>(a)]));
    const CVec is = ln.z_phase.fullPivLu().solve(diff);
    out.line_current.push_back(is.cwiseAbs());
    if (ln.t_neutral.size() > 0)
      out.neutral_current.push_back((ln.t_neutral * is).cwiseAbs());
    else
      out.neutral_current.emplace_back(RVec::Zero(0));
  }
  return out;
}

DispatchSolution recover_dispatch(const SolverResult& sol, const HermitianProgram& prog,
                                  const SystemMatrices& m, const FeederModel& model,
                                  const HorizonScenario& scenario, const RecoveryConfig& cfg) {
  const int T = prog.T;
  const int n = prog.n;
  if (static_cast<int>(sol.blocks.size()) < T)
    throw InputError(cat("solution carries ", sol.blocks.size(), " blocks, program has ", T,
                         " slots"));
  if (!(cfg.rank_threshold > 0.0)) throw InputError("rank threshold must be positive");

  DispatchSolution d;
  d.rank_ratio.resize(T);
  d.X.reserve(static_cast<size_t>(T));
  d.v.reserve(static_cast<size_t>(T));

  const int E = static_cast<int>(model.elastic.size());
  d.elastic = RMat::Zero(E, T);
  for (int e = 0; e < E; ++e)
    for (int t = 0; t < T; ++t)
      if (const int s = prog.pbar[static_cast<size_t>(e)][static_cast<size_t>(t)]; s >= 0)
        d.elastic(e, t) = sol.scalars(s);

  int n0 = 0;
  while (n0 < n && m.index.owner[static_cast<size_t>(n0)].first == 0) ++n0;
  d.p0.resize(n0, T);
  d.q0.resize(n0, T);
  d.pf0.resize(n0, T);
  for (size_t l = 0; l < model.lines.size(); ++l) {
    d.line_current.emplace_back(RMat::Zero(model.lines[l].phases.count(), T));
    const Eigen::Index wires = model.lines[l].t_neutral.rows();
    d.neutral_current.emplace_back(RMat::Zero(wires, T));
  }
  for (size_t u = 0; u < model.dg.size(); ++u)
    for (int ph : model.dg[u].phases.list()) {
      DispatchSolution::DgOutput g;
      g.unit = static_cast<int>(u);
      g.phase = ph;
      g.p = RVec::Zero(T);
      g.q = RVec::Zero(T);
      d.dg.push_back(std::move(g));
    }

  // deferred power landing on each global row, per slot
  RMat row_elastic = RMat::Zero(n, T);
  for (int e = 0; e < E; ++e) {
    const ElasticLoad& el = model.elastic[static_cast<size_t>(e)];
    const int r = m.index(model.node_index(el.node), el.phase);
    row_elastic.row(r) += d.elastic.row(e);
  }

  d.tight = true;
  d.objective = 0.0;
  for (int t = 0; t < T; ++t) {
    const CMat x = extract_hermitian(sol.blocks[static_cast<size_t>(t)], cfg.structure_tol);
    const RankInfo info = rank1_check(x, cfg.rank_threshold);
    d.rank_ratio(t) = info.rho;
    if (!info.is_rank1) d.tight = false;
    // on a failed rank test the dominant pair is still the most informative
    // summary, but the anchoring residual no longer has to hold
    const double atol = info.is_rank1 ? cfg.anchor_tol : kNoCap;
    const CVec v = recover_voltages(x, m, t, atol);
    const SlotPowers pw = recover_powers(v, m, model);

    d.p0.col(t) = pw.p0;
    d.q0.col(t) = pw.q0;
    d.pf0.col(t) = pw.pf0;
    for (size_t l = 0; l < model.lines.size(); ++l) {
      d.line_current[l].col(t) = pw.line_current[l];
      if (pw.neutral_current[l].size() > 0) d.neutral_current[l].col(t) = pw.neutral_current[l];
    }
    for (DispatchSolution::DgOutput& g : d.dg) {
      const DgUnit& unit = model.dg[static_cast<size_t>(g.unit)];
      const int r = m.index(model.node_index(unit.node), g.phase);
      const std::string& id = model.nodes[static_cast<size_t>(model.node_index(unit.node))].id;
      g.p(t) = pw.net_p(r) + scenario.p_load(id, g.phase, t) + row_elastic(r, t);
      g.q(t) = pw.net_q(r) + scenario.q_load(id, g.phase, t);
    }

    // feed and generator net injections priced exactly as dispatched
    double cost = scenario.kappa[t] * pw.net_p.head(n0).sum();
    for (size_t u = 0; u < model.dg.size(); ++u) {
      const int nd = model.node_index(model.dg[u].node);
      for (int ph : model.dg[u].phases.list())
        cost += scenario.dg_cost(static_cast<Eigen::Index>(u), t) * pw.net_p(m.index(nd, ph));
    }
    d.objective += cost;

    d.X.push_back(x);
    d.v.push_back(v);
  }
  return d;
}

}  // namespace sdopf
