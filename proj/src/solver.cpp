#include "sdopf/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace sdopf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Preprocessing: canonical row order, row scaling, group layout.
//
// The program is solved in a homogeneous form, so every row enters as an
// equality <A_i, S> + a_i.x = b_i tau. Rows are normalized to unit Frobenius
// norm and sorted by content, which makes the iterates independent of the
// input row order. Each row is assigned to the group of the blocks/scalars it
// touches; rows spanning several groups (or none) form the border of a
// block-arrow normal system.
// ---------------------------------------------------------------------------

struct CRow {
  std::vector<ConicProgram::Term> terms;
  std::vector<std::pair<int, double>> lin;
  double b = 0.0;
  int orig = -1;
  double scale = 1.0;  // factor applied to the row (coefficients and rhs)
};

void merge_entries(std::vector<SymEntry>& es) {
  std::sort(es.begin(), es.end(), [](const SymEntry& a, const SymEntry& b) {
    return a.r != b.r ? a.r < b.r : a.c < b.c;
  });
  std::vector<SymEntry> out;
  for (const auto& e : es) {
    if (!out.empty() && out.back().r == e.r && out.back().c == e.c)
      out.back().v += e.v;
    else
      out.push_back(e);
  }
  out.erase(std::remove_if(out.begin(), out.end(),
                           [](const SymEntry& e) { return e.v == 0.0; }),
            out.end());
  es = std::move(out);
}

CRow canonical_row(const ConicProgram::Row& row, int orig) {
  CRow cr;
  cr.orig = orig;
  cr.b = row.rhs;
  // merge duplicate terms per block, then duplicate entries per term
  std::vector<ConicProgram::Term> terms = row.terms;
  std::sort(terms.begin(), terms.end(),
            [](const auto& a, const auto& b) { return a.block < b.block; });
  for (auto& t : terms) {
    if (!cr.terms.empty() && cr.terms.back().block == t.block) {
      auto& dst = cr.terms.back().entries;
      dst.insert(dst.end(), t.entries.begin(), t.entries.end());
    } else {
      cr.terms.push_back(std::move(t));
    }
  }
  for (auto& t : cr.terms) merge_entries(t.entries);
  cr.terms.erase(std::remove_if(cr.terms.begin(), cr.terms.end(),
                                [](const auto& t) { return t.entries.empty(); }),
                 cr.terms.end());
  cr.lin = row.lin;
  std::sort(cr.lin.begin(), cr.lin.end());
  std::vector<std::pair<int, double>> lin;
  for (const auto& [k, a] : cr.lin) {
    if (!lin.empty() && lin.back().first == k)
      lin.back().second += a;
    else
      lin.emplace_back(k, a);
  }
  lin.erase(std::remove_if(lin.begin(), lin.end(),
                           [](const auto& q) { return q.second == 0.0; }),
            lin.end());
  cr.lin = std::move(lin);

  double sq = 0.0;
  for (const auto& t : cr.terms)
    for (const auto& e : t.entries) sq += (e.r == e.c ? 1.0 : 2.0) * e.v * e.v;
  for (const auto& [k, a] : cr.lin) sq += a * a;
  if (sq > 0.0) {
    cr.scale = 1.0 / std::sqrt(sq);
    for (auto& t : cr.terms)
      for (auto& e : t.entries) e.v *= cr.scale;
    for (auto& [k, a] : cr.lin) a *= cr.scale;
    cr.b *= cr.scale;
  }
  return cr;
}

// strict content order; rows comparing equal are arithmetically identical
bool content_less(const CRow& x, const CRow& y) {
  if (x.b != y.b) return x.b < y.b;
  if (x.terms.size() != y.terms.size()) return x.terms.size() < y.terms.size();
  for (size_t t = 0; t < x.terms.size(); ++t) {
    const auto& a = x.terms[t];
    const auto& b = y.terms[t];
    if (a.block != b.block) return a.block < b.block;
    if (a.entries.size() != b.entries.size())
      return a.entries.size() < b.entries.size();
    for (size_t e = 0; e < a.entries.size(); ++e) {
      const auto& u = a.entries[e];
      const auto& v = b.entries[e];
      if (u.r != v.r) return u.r < v.r;
      if (u.c != v.c) return u.c < v.c;
      if (u.v != v.v) return u.v < v.v;
    }
  }
  if (x.lin.size() != y.lin.size()) return x.lin.size() < y.lin.size();
  for (size_t e = 0; e < x.lin.size(); ++e) {
    if (x.lin[e].first != y.lin[e].first) return x.lin[e].first < y.lin[e].first;
    if (x.lin[e].second != y.lin[e].second) return x.lin[e].second < y.lin[e].second;
  }
  return false;
}

// per-(row, block) coefficient with a precomputed low-rank factorization
// A = P_idx (Z diag(lam) Z^T) P_idx^T, used when forming the normal matrix
struct BTerm {
  int row = -1;
  const std::vector<SymEntry>* es = nullptr;
  std::vector<int> idx;  // distinct indices touched
  RMat Z;                // |idx| x rank
  RVec lam;              // rank
};

struct Prep {
  int m = 0;  // rows kept after dropping all-zero rows
  int nb = 0, ns = 0;
  int G = 0;  // number of proper groups; group id G = border
  std::vector<CRow> rows;
  std::vector<int> bdim, bgroup;
  std::vector<char> bemb;
  RVec b;
  std::vector<RMat> C;  // dense objective per block
  RVec clin;
  double normb = 0.0, normc = 0.0, cmax = 0.0;
  double nu = 1.0;            // barrier degree
  std::vector<int> group_of;  // per row, 0..G-1 or G
  std::vector<int> gpos;      // position within the group's row list
  std::vector<std::vector<int>> grows;  // size G+1, last entry = border rows
  std::vector<std::vector<BTerm>> bterms;
  std::vector<std::vector<std::pair<int, double>>> srows;  // per scalar
  int n_orig = 0;
  int bad_zero_row = -1;  // all-zero row with nonzero rhs (original index)
};

Prep preprocess(const ConicProgram& p) {
  Prep P;
  P.n_orig = static_cast<int>(p.rows.size());
  P.nb = static_cast<int>(p.blocks.size());
  P.ns = static_cast<int>(p.scalars.size());
  for (const auto& bl : p.blocks) {
    P.bdim.push_back(bl.dim);
    P.bgroup.push_back(bl.group);
    P.bemb.push_back(bl.embedded ? 1 : 0);
  }

  std::vector<CRow> rows;
  for (size_t i = 0; i < p.rows.size(); ++i) {
    CRow cr = canonical_row(p.rows[i], static_cast<int>(i));
    if (cr.terms.empty() && cr.lin.empty()) {
      if (cr.b != 0.0 && P.bad_zero_row < 0) P.bad_zero_row = cr.orig;
      continue;  // all-zero row: infeasible if rhs != 0, redundant otherwise
    }
    rows.push_back(std::move(cr));
  }
  std::sort(rows.begin(), rows.end(), content_less);
  P.rows = std::move(rows);
  P.m = static_cast<int>(P.rows.size());

  int gmax = -1;
  for (const auto& bl : p.blocks) gmax = std::max(gmax, bl.group);
  for (const auto& sc : p.scalars) gmax = std::max(gmax, sc.group);
  P.G = gmax + 1;

  P.group_of.resize(P.m);
  P.gpos.resize(P.m);
  P.grows.assign(P.G + 1, {});
  for (int i = 0; i < P.m; ++i) {
    std::set<int> gs;
    for (const auto& t : P.rows[i].terms) gs.insert(p.blocks[t.block].group);
    for (const auto& [k, a] : P.rows[i].lin) gs.insert(p.scalars[k].group);
    const int g = (gs.size() == 1 && *gs.begin() >= 0) ? *gs.begin() : P.G;
    P.group_of[i] = g;
    P.gpos[i] = static_cast<int>(P.grows[g].size());
    P.grows[g].push_back(i);
  }

  P.b = RVec::Zero(P.m);
  for (int i = 0; i < P.m; ++i) P.b(i) = P.rows[i].b;
  P.normb = P.b.norm();

  P.C.resize(P.nb);
  for (int bI = 0; bI < P.nb; ++bI) P.C[bI] = RMat::Zero(P.bdim[bI], P.bdim[bI]);
  for (const auto& t : p.obj_blocks)
    P.C[t.block] += sym_to_dense(t.entries, P.bdim[t.block]);
  P.clin = RVec::Zero(P.ns);
  for (const auto& [k, a] : p.obj_lin) P.clin(k) += a;
  double csq = P.clin.squaredNorm();
  for (const auto& C : P.C) csq += C.squaredNorm();
  P.normc = std::sqrt(csq);
  P.cmax = P.ns > 0 ? P.clin.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& C : P.C)
    if (C.size() > 0) P.cmax = std::max(P.cmax, C.cwiseAbs().maxCoeff());

  P.nu = 1.0 + P.ns;
  for (int d : P.bdim) P.nu += d;

  // adjacency + low-rank factorization of every (row, block) coefficient
  P.bterms.assign(P.nb, {});
  P.srows.assign(P.ns, {});
  for (int i = 0; i < P.m; ++i) {
    for (const auto& t : P.rows[i].terms) {
      BTerm bt;
      bt.row = i;
      bt.es = &t.entries;
      std::set<int> ids;
      for (const auto& e : t.entries) {
        ids.insert(e.r);
        ids.insert(e.c);
      }
      bt.idx.assign(ids.begin(), ids.end());
      const int q = static_cast<int>(bt.idx.size());
      RMat small = RMat::Zero(q, q);
      auto pos = [&](int r) {
        return static_cast<int>(
            std::lower_bound(bt.idx.begin(), bt.idx.end(), r) - bt.idx.begin());
      };
      for (const auto& e : t.entries) {
        small(pos(e.r), pos(e.c)) = e.v;
        small(pos(e.c), pos(e.r)) = e.v;
      }
      Eigen::SelfAdjointEigenSolver<RMat> eig(small);
      const RVec& ev = eig.eigenvalues();
      const double cut = 1e-13 * ev.cwiseAbs().maxCoeff();
      std::vector<int> keep;
      for (int l = 0; l < q; ++l)
        if (std::abs(ev(l)) > cut) keep.push_back(l);
      bt.Z.resize(q, static_cast<int>(keep.size()));
      bt.lam.resize(static_cast<int>(keep.size()));
      for (size_t l = 0; l < keep.size(); ++l) {
        bt.Z.col(static_cast<int>(l)) = eig.eigenvectors().col(keep[l]);
        bt.lam(static_cast<int>(l)) = ev(keep[l]);
      }
      P.bterms[t.block].push_back(std::move(bt));
    }
    for (const auto& [k, a] : P.rows[i].lin) P.srows[k].emplace_back(i, a);
  }
  return P;
}

// ---------------------------------------------------------------------------
// Cone operations
// ---------------------------------------------------------------------------

bool chol_jitter(RMat m, Eigen::LLT<RMat>& out) {
  const int d = static_cast<int>(m.rows());
  double jit = 1e-14 * std::max(1.0, m.trace() / std::max(1, d));
  for (int attempt = 0; attempt < 3; ++attempt) {
    out.compute(m);
    if (out.info() == Eigen::Success) return true;
    m.diagonal().array() += jit;
    jit *= 1e4;
  }
  return false;
}

struct NT {
  std::vector<RMat> G, Gi, W;
  std::vector<RMat> Lx, Ls;  // Cholesky factors of the current X and S
  std::vector<RVec> sig;     // shared scaled spectrum per block
  RVec w;                    // scalar weights u/s
};

bool nt_scaling(const Prep& P, const std::vector<RMat>& X,
                const std::vector<RMat>& S, const RVec& u, const RVec& s,
                NT& nt) {
  const int nb = P.nb;
  nt.G.resize(nb);
  nt.Gi.resize(nb);
  nt.W.resize(nb);
  nt.Lx.resize(nb);
  nt.Ls.resize(nb);
  nt.sig.resize(nb);
  for (int b = 0; b < nb; ++b) {
    Eigen::LLT<RMat> cx, cs;
    if (!chol_jitter(X[b], cx) || !chol_jitter(S[b], cs)) return false;
    nt.Lx[b] = cx.matrixL();
    nt.Ls[b] = cs.matrixL();
    Eigen::JacobiSVD<RMat> svd(nt.Ls[b].transpose() * nt.Lx[b],
                               Eigen::ComputeThinU | Eigen::ComputeThinV);
    RVec sg = svd.singularValues();
    if (!(sg.minCoeff() > 0.0)) return false;
    nt.sig[b] = sg;
    const RVec isq = sg.cwiseSqrt().cwiseInverse();
    nt.G[b] = nt.Lx[b] * svd.matrixV() * isq.asDiagonal();
    const RMat z =
        nt.Lx[b].transpose().triangularView<Eigen::Upper>().solve(svd.matrixV());
    nt.Gi[b] = sg.cwiseSqrt().asDiagonal() * z.transpose();
    nt.W[b] = nt.G[b] * nt.G[b].transpose();
    if (!nt.W[b].allFinite()) return false;
  }
  nt.w = u.cwiseQuotient(s);
  return P.ns == 0 || nt.w.allFinite();
}

// largest step with V + alpha*dV staying PSD, given V = L L^T
double max_step_psd(const RMat& L, const RMat& dV) {
  RMat k = L.triangularView<Eigen::Lower>().solve(dV);
  k = L.triangularView<Eigen::Lower>().solve(RMat(k.transpose()));
  k = 0.5 * (k + k.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<RMat> eig(k, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  return lmin < 0.0 ? 1.0 / (-lmin) : kInf;
}

double max_step_vec(const RVec& v, const RVec& dv) {
  double a = kInf;
  for (int i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  return a;
}

// average a lowered block onto its invariant subspace (commutes with the
// quarter-turn map), cancelling numerical drift of the paired spectrum
void jproject(RMat& m) {
  const int h = static_cast<int>(m.rows()) / 2;
  const RMat a = m.topLeftCorner(h, h), bq = m.topRightCorner(h, h),
             cq = m.bottomLeftCorner(h, h), dq = m.bottomRightCorner(h, h);
  const RMat pm = 0.5 * (a + dq), qm = 0.5 * (bq - cq);
  m.topLeftCorner(h, h) = pm;
  m.bottomRightCorner(h, h) = pm;
  m.topRightCorner(h, h) = qm;
  m.bottomLeftCorner(h, h) = -qm;
}

// ---------------------------------------------------------------------------
// Row-space linear algebra
// ---------------------------------------------------------------------------

void add_entries(RMat& acc, const std::vector<SymEntry>& es, double z) {
  for (const auto& e : es) {
    acc(e.r, e.c) += z * e.v;
    if (e.r != e.c) acc(e.c, e.r) += z * e.v;
  }
}

// val_i = sum_b <A_ib, M_b> + sum_k a_ik f_k
RVec apply_rows(const Prep& P, const std::vector<RMat>& M, const RVec& f) {
  RVec out = RVec::Zero(P.m);
  for (int b = 0; b < P.nb; ++b)
    for (const auto& bt : P.bterms[b]) out(bt.row) += sym_dot(*bt.es, M[b]);
  for (int k = 0; k < P.ns; ++k)
    for (const auto& [i, a] : P.srows[k]) out(i) += a * f(k);
  return out;
}

// accB_b += sign * sum_i y_i A_ib ; accS_k += sign * sum_i y_i a_ik
void add_aty(const Prep& P, const RVec& y, std::vector<RMat>& accB, RVec& accS,
             double sign) {
  for (int b = 0; b < P.nb; ++b)
    for (const auto& bt : P.bterms[b])
      add_entries(accB[b], *bt.es, sign * y(bt.row));
  for (int k = 0; k < P.ns; ++k)
    for (const auto& [i, a] : P.srows[k]) accS(k) += sign * a * y(i);
}

// Normal matrix A W A^T in block-arrow form: one dense diagonal block per
// group plus a border for cross-group rows. Factorized once per iteration.
struct Normal {
  std::vector<Eigen::LLT<RMat>> dllt;
  std::vector<RMat> B;      // group x border coupling
  std::vector<RMat> dinvB;  // D_g^{-1} B_g
  Eigen::LLT<RMat> sllt;    // border Schur complement
  double regabs = 0.0;      // uniform diagonal shift the factorization carries
  bool ok = false;
};

Normal build_normal(const Prep& P, const NT& nt, double reg) {
  Normal nf;
  const int G = P.G;
  const int m0 = static_cast<int>(P.grows[G].size());
  std::vector<RMat> D(G);
  for (int g = 0; g < G; ++g) {
    const int mg = static_cast<int>(P.grows[g].size());
    D[g] = RMat::Zero(mg, mg);
  }
  RMat D0 = RMat::Zero(m0, m0);
  nf.B.assign(G, RMat());
  for (int g = 0; g < G; ++g)
    nf.B[g] = RMat::Zero(static_cast<int>(P.grows[g].size()), m0);

  auto deposit = [&](int i, int j, double v) {
    const int gi = P.group_of[i], gj = P.group_of[j];
    const int pi = P.gpos[i], pj = P.gpos[j];
    if (gi == G && gj == G) {
      D0(pi, pj) += v;
      if (pi != pj) D0(pj, pi) += v;
    } else if (gi == gj) {
      D[gi](pi, pj) += v;
      if (pi != pj) D[gi](pj, pi) += v;
    } else if (gi == G) {
      nf.B[gj](pj, pi) += v;
    } else {
      nf.B[gi](pi, pj) += v;
    }
  };

  for (int b = 0; b < P.nb; ++b) {
    const auto& tl = P.bterms[b];
    if (tl.empty()) continue;
    const RMat& W = nt.W[b];
    const int d = P.bdim[b];
    RMat wsel, usc, t;
    for (size_t jj = 0; jj < tl.size(); ++jj) {
      const BTerm& fj = tl[jj];
      const int q = static_cast<int>(fj.idx.size());
      wsel.resize(d, q);
      for (int c = 0; c < q; ++c) wsel.col(c) = W.col(fj.idx[c]);
      usc.noalias() = wsel * fj.Z;
      t.noalias() = usc * fj.lam.asDiagonal() * usc.transpose();
      for (size_t ii = 0; ii <= jj; ++ii)
        deposit(tl[ii].row, fj.row, sym_dot(*tl[ii].es, t));
    }
  }
  for (int k = 0; k < P.ns; ++k) {
    const double wk = nt.w(k);
    const auto& rl = P.srows[k];
    for (size_t jj = 0; jj < rl.size(); ++jj)
      for (size_t ii = 0; ii <= jj; ++ii)
        deposit(rl[ii].first, rl[jj].first, wk * rl[ii].second * rl[jj].second);
  }

  // one uniform shift keeps the factorization an exact Cholesky of M + r I,
  // so refinement against the true operator stays meaningful
  double diagmax = 0.0;
  for (int g = 0; g < G; ++g)
    if (D[g].size() > 0) diagmax = std::max(diagmax, D[g].diagonal().maxCoeff());
  if (m0 > 0) diagmax = std::max(diagmax, D0.diagonal().maxCoeff());
  nf.regabs = reg * std::max(1.0, diagmax);

  nf.dllt.resize(G);
  nf.dinvB.assign(G, RMat());
  for (int g = 0; g < G; ++g) {
    if (D[g].size() == 0) continue;
    if (!D[g].allFinite()) return nf;
    D[g].diagonal().array() += nf.regabs;
    nf.dllt[g].compute(D[g]);
    if (nf.dllt[g].info() != Eigen::Success) return nf;
    if (m0 > 0) {
      nf.dinvB[g] = nf.dllt[g].solve(nf.B[g]);
      D0.noalias() -= nf.B[g].transpose() * nf.dinvB[g];
    }
  }
  if (m0 > 0) {
    if (!D0.allFinite()) return nf;
    D0.diagonal().array() += nf.regabs;
    nf.sllt.compute(D0);
    if (nf.sllt.info() != Eigen::Success) return nf;
  }
  nf.ok = true;
  return nf;
}

RVec solve_normal_raw(const Prep& P, const Normal& nf, const RVec& rhs) {
  const int G = P.G;
  const int m0 = static_cast<int>(P.grows[G].size());
  RVec out = RVec::Zero(P.m);
  RVec r0(m0);
  for (int i = 0; i < m0; ++i) r0(i) = rhs(P.grows[G][i]);
  std::vector<RVec> zg(G);
  for (int g = 0; g < G; ++g) {
    const auto& idx = P.grows[g];
    if (idx.empty()) continue;
    RVec rg(idx.size());
    for (size_t i = 0; i < idx.size(); ++i)
      rg(static_cast<int>(i)) = rhs(idx[i]);
    zg[g] = nf.dllt[g].solve(rg);
    if (m0 > 0) r0.noalias() -= nf.B[g].transpose() * zg[g];
  }
  RVec z0;
  if (m0 > 0) {
    z0 = nf.sllt.solve(r0);
    for (int i = 0; i < m0; ++i) out(P.grows[G][i]) = z0(i);
  }
  for (int g = 0; g < G; ++g) {
    const auto& idx = P.grows[g];
    if (idx.empty()) continue;
    if (m0 > 0) zg[g].noalias() -= nf.dinvB[g] * z0;
    for (size_t i = 0; i < idx.size(); ++i)
      out(idx[i]) = zg[g](static_cast<int>(i));
  }
  return out;
}

// exact (M + r I) z through the original coefficients, for refinement
RVec apply_normal(const Prep& P, const NT& nt, double regabs, const RVec& z) {
  RVec out = regabs * z;
  for (int b = 0; b < P.nb; ++b) {
    const auto& tl = P.bterms[b];
    if (tl.empty()) continue;
    RMat acc = RMat::Zero(P.bdim[b], P.bdim[b]);
    for (const auto& bt : tl) add_entries(acc, *bt.es, z(bt.row));
    const RMat t = nt.W[b] * acc * nt.W[b];
    for (const auto& bt : tl) out(bt.row) += sym_dot(*bt.es, t);
  }
  for (int k = 0; k < P.ns; ++k) {
    double az = 0.0;
    for (const auto& [i, a] : P.srows[k]) az += a * z(i);
    for (const auto& [i, a] : P.srows[k]) out(i) += a * nt.w(k) * az;
  }
  return out;
}

RVec solve_normal(const Prep& P, const NT& nt, const Normal& nf,
                  const RVec& rhs) {
  // The factorization answers the shifted system (M + r I) z = rhs, so its
  // direct solve is biased by the shift.  Refining against the unshifted
  // operator removes that bias geometrically (contraction r / (lambda + r)
  // per pass), which is what lets the shift stay a pure factorization aid.
  // Each pass keeps its correction only when the true residual actually
  // drops: near a degenerate face the correction can rotate into the
  // numerical null space and make things worse.
  RVec z = solve_normal_raw(P, nf, rhs);
  RVec res = rhs - apply_normal(P, nt, 0.0, z);
  double rn = res.squaredNorm();
  const double stop = 1e-28 * std::max(1.0, rhs.squaredNorm());
  for (int pass = 0; pass < 3 && rn > stop; ++pass) {
    const RVec zc = z + solve_normal_raw(P, nf, res);
    const RVec resc = rhs - apply_normal(P, nt, 0.0, zc);
    const double rc = resc.squaredNorm();
    if (rc >= rn) break;
    z = zc;
    res = resc;
    rn = rc;
  }
  return z;
}

// ---------------------------------------------------------------------------
// Search directions
// ---------------------------------------------------------------------------

struct Residuals {
  RVec rP;               // A x - b tau
  std::vector<RMat> RD;  // -A'y + c tau - S, block part
  RVec rd;               // scalar part
  double rG = 0.0;       // b.y - c.x - kappa
};

struct CompTarget {
  std::vector<RMat> R;  // scaled-space PSD targets
  RVec rlp;             // scalar pair targets
  double rtk = 0.0;     // tau*kappa target
};

struct Shared {
  std::vector<RMat> WcW;
  RVec wc;
  RVec u1, u2, z1;
  double dcoef = 0.0;
};

struct Dir {
  std::vector<RMat> dX, dS;
  RVec du, ds, dy;
  double dtau = 0.0, dkappa = 0.0;
};

// elementwise inverse of the Lyapunov weighting in the scaled space
RMat lyap_inv(const RMat& r, const RVec& sig) {
  RMat out(r.rows(), r.cols());
  for (int i = 0; i < r.rows(); ++i)
    for (int j = 0; j < r.cols(); ++j)
      out(i, j) = r(i, j) * 2.0 / (sig(i) + sig(j));
  return out;
}

// One Newton solve on the homogeneous system. All four residual equations are
// targeted at full annihilation; the complementarity targets come in `ct`.
// Elimination order: ds from the dual equation, dX from the scaled
// complementarity, then the (dy, dtau) saddle system with the normal matrix.
bool compute_dir(const Prep& P, const NT& nt, const Normal& nf,
                 const Shared& sh, const Residuals& rs, const CompTarget& ct,
                 const RVec& s, double tau, double kappa, Dir& d) {
  const int nb = P.nb;
  std::vector<RMat> E(nb), F(nb);
  double cF = 0.0;
  for (int b = 0; b < nb; ++b) {
    E[b] = nt.G[b] * lyap_inv(ct.R[b], nt.sig[b]) * nt.G[b].transpose();
    F[b] = E[b] - nt.W[b] * rs.RD[b] * nt.W[b];
    cF += (P.C[b].cwiseProduct(F[b])).sum();
  }
  RVec elp = RVec::Zero(P.ns), f = RVec::Zero(P.ns);
  for (int k = 0; k < P.ns; ++k) {
    elp(k) = ct.rlp(k) / s(k);
    f(k) = elp(k) - nt.w(k) * rs.rd(k);
  }
  cF += P.clin.dot(f);

  const RVec rhs1 = -rs.rP - apply_rows(P, F, f);
  const double rhs2 = -rs.rG + cF + ct.rtk / tau;
  const RVec z2 = solve_normal(P, nt, nf, rhs1);

  const double den = sh.dcoef + sh.u2.dot(sh.z1);
  if (!(std::abs(den) > 1e-300)) return false;
  d.dtau = (rhs2 - sh.u2.dot(z2)) / den;
  d.dy = z2 + d.dtau * sh.z1;

  d.dS.assign(nb, RMat());
  for (int b = 0; b < nb; ++b)
    d.dS[b] = P.C[b] * d.dtau + rs.RD[b];
  d.ds = P.clin * d.dtau + rs.rd;
  add_aty(P, d.dy, d.dS, d.ds, -1.0);
  d.dX.assign(nb, RMat());
  for (int b = 0; b < nb; ++b) {
    d.dS[b] = 0.5 * (d.dS[b] + d.dS[b].transpose()).eval();
    d.dX[b] = E[b] - nt.W[b] * d.dS[b] * nt.W[b];
    d.dX[b] = 0.5 * (d.dX[b] + d.dX[b].transpose()).eval();
  }
  d.du = elp - nt.w.cwiseProduct(d.ds);
  d.dkappa = (ct.rtk - kappa * d.dtau) / tau;

  for (int b = 0; b < nb; ++b)
    if (!d.dX[b].allFinite() || !d.dS[b].allFinite()) return false;
  return d.du.allFinite() && d.ds.allFinite() && d.dy.allFinite() &&
         std::isfinite(d.dtau) && std::isfinite(d.dkappa);
}

double bound_step(const Prep& P, const NT& nt, const RVec& u, const RVec& s,
                  double tau, double kappa, const Dir& d) {
  double a = kInf;
  for (int b = 0; b < P.nb; ++b) {
    a = std::min(a, max_step_psd(nt.Lx[b], d.dX[b]));
    a = std::min(a, max_step_psd(nt.Ls[b], d.dS[b]));
  }
  a = std::min(a, max_step_vec(u, d.du));
  a = std::min(a, max_step_vec(s, d.ds));
  if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
  if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
  return a;
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::PrimalInfeasible:
      return "primal infeasible";
    case SolveStatus::DualInfeasible:
      return "dual infeasible";
    case SolveStatus::IterationLimit:
      return "iteration limit";
    case SolveStatus::NumericalFailure:
      return "numerical failure";
  }
  return "unknown";
}

SolverResult solve(const ConicProgram& p, const SolverConfig& cfg) {
  if (!(cfg.tol > 0.0)) throw InputError("solver tolerance must be positive");
  if (cfg.max_iter < 1) throw InputError("iteration limit must be at least 1");
  {
    auto errs = validate_program(p);
    if (!errs.empty())
      throw InputError("conic solve: " + errs.front());
  }
  Prep P = preprocess(p);
  SolverResult res;

  // an all-zero row with nonzero rhs is a ready-made infeasibility certificate
  if (P.bad_zero_row >= 0) {
    res.status = SolveStatus::PrimalInfeasible;
    res.dual = RVec::Zero(P.n_orig);
    res.dual(P.bad_zero_row) = p.rows[P.bad_zero_row].rhs > 0.0 ? 1.0 : -1.0;
    return res;
  }

  std::ostream* lg = cfg.log ? cfg.log : (cfg.verbose ? &std::clog : nullptr);

  // homogeneous start: identity blocks scaled to the problem data
  const double ip = 1.0 + (P.m > 0 ? P.b.cwiseAbs().maxCoeff() : 0.0);
  const double id = 1.0 + P.cmax;
  std::vector<RMat> X(P.nb), S(P.nb);
  for (int b = 0; b < P.nb; ++b) {
    X[b] = ip * RMat::Identity(P.bdim[b], P.bdim[b]);
    S[b] = id * RMat::Identity(P.bdim[b], P.bdim[b]);
  }
  RVec u = ip * RVec::Ones(P.ns), s = id * RVec::Ones(P.ns);
  RVec y = RVec::Zero(P.m);
  double tau = 1.0, kappa = ip * id;
  const double mu0 = ip * id;

  auto fill_candidate = [&](double t) {
    res.blocks.resize(P.nb);
    res.dual_blocks.resize(P.nb);
    for (int b = 0; b < P.nb; ++b) {
      res.blocks[b] = X[b] / t;
      res.dual_blocks[b] = S[b] / t;
    }
    res.scalars = u / t;
    res.dual_scalars = s / t;
    res.dual = RVec::Zero(P.n_orig);
    for (int i = 0; i < P.m; ++i)
      res.dual(P.rows[i].orig) = P.rows[i].scale * y(i) / t;
  };

  Residuals rs;
  rs.RD.resize(P.nb);
  int it = 0;
  for (;; ++it) {
    // residuals and merit quantities
    rs.rP = apply_rows(P, X, u) - P.b * tau;
    for (int b = 0; b < P.nb; ++b) rs.RD[b] = P.C[b] * tau - S[b];
    rs.rd = P.clin * tau - s;
    add_aty(P, y, rs.RD, rs.rd, -1.0);
    double cx = P.clin.dot(u);
    for (int b = 0; b < P.nb; ++b) cx += (P.C[b].cwiseProduct(X[b])).sum();
    const double by = P.b.dot(y);
    rs.rG = by - cx - kappa;

    double xs = u.dot(s) + tau * kappa;
    for (int b = 0; b < P.nb; ++b) xs += (X[b].cwiseProduct(S[b])).sum();
    const double mu = xs / P.nu;

    double rdsq = rs.rd.squaredNorm();
    for (int b = 0; b < P.nb; ++b) rdsq += rs.RD[b].squaredNorm();
    const double rel_p = rs.rP.norm() / tau / (1.0 + P.normb);
    const double rel_d = std::sqrt(rdsq) / tau / (1.0 + P.normc);
    const double pobj = cx / tau, dobj = by / tau;
    const double rel_g =
        std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

    IterationStats st;
    st.iter = it;
    st.mu = mu;
    st.rel_p = rel_p;
    st.rel_d = rel_d;
    st.rel_g = rel_g;
    st.tau = tau;
    st.kappa = kappa;
    st.primal_obj = pobj;
    st.dual_obj = dobj;
    st.rgap = rs.rG / tau;
    res.trace.push_back(st);
    res.iterations = it;
    res.rel_primal = rel_p;
    res.rel_dual = rel_d;
    res.rel_gap = rel_g;
    res.mu = mu;
    res.objective = pobj;

    if (lg)
      *lg << "it " << std::setw(3) << it << std::scientific
          << std::setprecision(2) << "  mu " << mu << "  p " << rel_p << "  d "
          << rel_d << "  g " << rel_g << "  tau " << tau << "  kap " << kappa
          << std::defaultfloat << '\n';

    if (rel_p <= cfg.tol && rel_d <= cfg.tol && rel_g <= cfg.tol) {
      res.status = SolveStatus::Optimal;
      fill_candidate(tau);
      return res;
    }
    if (tau <= cfg.tol * std::min(1.0, kappa)) {
      double xinf = u.size() > 0 ? u.cwiseAbs().maxCoeff() : 0.0;
      for (int b = 0; b < P.nb; ++b)
        xinf = std::max(xinf, X[b].cwiseAbs().maxCoeff());
      const double yinf = y.size() > 0 ? y.cwiseAbs().maxCoeff() : 0.0;
      if (by > cfg.tol * (1.0 + yinf)) {
        res.status = SolveStatus::PrimalInfeasible;
        res.objective = 0.0;
        // Farkas-type ray: b.dual > 0 while -A'dual stays conic
        res.dual = RVec::Zero(P.n_orig);
        for (int i = 0; i < P.m; ++i)
          res.dual(P.rows[i].orig) = P.rows[i].scale * y(i);
        res.dual_blocks.assign(S.begin(), S.end());
        res.dual_scalars = s;
      } else if (-cx > cfg.tol * (1.0 + xinf)) {
        res.status = SolveStatus::DualInfeasible;
        res.objective = 0.0;
        // unbounded primal ray: A.ray = 0, objective strictly decreasing
        res.blocks.assign(X.begin(), X.end());
        res.scalars = u;
      } else {
        res.status = SolveStatus::NumericalFailure;
      }
      return res;
    }
    if (it >= cfg.max_iter) {
      res.status = SolveStatus::IterationLimit;
      fill_candidate(tau);
      return res;
    }
    if (!(mu > 1e-14 * mu0) || mu > 1e10 * mu0 || !std::isfinite(mu)) {
      res.status = SolveStatus::NumericalFailure;
      fill_candidate(std::max(tau, 1e-300));
      return res;
    }

    // scaling and normal-system factorization (with regularization retries)
    NT nt;
    if (!nt_scaling(P, X, S, u, s, nt)) {
      res.status = SolveStatus::NumericalFailure;
      fill_candidate(tau);
      return res;
    }
    Normal nf;
    double reg = cfg.static_reg;
    for (int attempt = 0; attempt < 4 && !nf.ok; ++attempt) {
      nf = build_normal(P, nt, reg);
      reg = reg == 0.0 ? 1e-12 : reg * 100.0;
    }
    if (!nf.ok) {
      res.status = SolveStatus::NumericalFailure;
      fill_candidate(tau);
      return res;
    }

    Shared sh;
    sh.WcW.resize(P.nb);
    sh.dcoef = kappa / tau;
    for (int b = 0; b < P.nb; ++b) {
      sh.WcW[b] = nt.W[b] * P.C[b] * nt.W[b];
      sh.dcoef += (P.C[b].cwiseProduct(sh.WcW[b])).sum();
    }
    sh.wc = nt.w.cwiseProduct(P.clin);
    sh.dcoef += P.clin.dot(sh.wc);
    sh.u1 = P.b + apply_rows(P, sh.WcW, sh.wc);
    sh.u2 = 2.0 * P.b - sh.u1;
    sh.z1 = solve_normal(P, nt, nf, sh.u1);

    // predictor: aim at zero complementarity
    CompTarget aff;
    aff.R.resize(P.nb);
    for (int b = 0; b < P.nb; ++b)
      aff.R[b] = (-nt.sig[b].array().square()).matrix().asDiagonal();
    aff.rlp = -u.cwiseProduct(s);
    aff.rtk = -tau * kappa;
    Dir da;
    if (!compute_dir(P, nt, nf, sh, rs, aff, s, tau, kappa, da)) {
      res.status = SolveStatus::NumericalFailure;
      fill_candidate(tau);
      return res;
    }
    const double a_aff =
        std::min(1.0, bound_step(P, nt, u, s, tau, kappa, da));
    double xs_aff = (u + a_aff * da.du).dot(s + a_aff * da.ds) +
                    (tau + a_aff * da.dtau) * (kappa + a_aff * da.dkappa);
    for (int b = 0; b < P.nb; ++b)
      xs_aff += ((X[b] + a_aff * da.dX[b])
                     .cwiseProduct(S[b] + a_aff * da.dS[b]))
                    .sum();
    const double mu_aff = xs_aff / P.nu;
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
    sigma = std::min(std::max(sigma, 1e-12), 0.999);

    // corrector: recentre and subtract the predictor's second-order error
    CompTarget cor;
    cor.R.resize(P.nb);
    for (int b = 0; b < P.nb; ++b) {
      const RMat dvx = nt.Gi[b] * da.dX[b] * nt.Gi[b].transpose();
      const RMat dvs = nt.G[b].transpose() * da.dS[b] * nt.G[b];
      RMat r = -0.5 * (dvx * dvs + dvs * dvx);
      r.diagonal().array() += sigma * mu;
      r -= RMat((nt.sig[b].array().square()).matrix().asDiagonal());
      cor.R[b] = r;
    }
    cor.rlp = RVec::Constant(P.ns, sigma * mu) - u.cwiseProduct(s) -
              da.du.cwiseProduct(da.ds);
    cor.rtk = sigma * mu - tau * kappa - da.dtau * da.dkappa;
    Dir dc;
    if (!compute_dir(P, nt, nf, sh, rs, cor, s, tau, kappa, dc)) {
      res.status = SolveStatus::NumericalFailure;
      fill_candidate(tau);
      return res;
    }
    const double alpha = std::min(
        cfg.step_fraction * bound_step(P, nt, u, s, tau, kappa, dc), 1.0);
    res.trace.back().step = alpha;
    res.trace.back().sigma = sigma;
    if (lg)
      *lg << "      step " << std::scientific << std::setprecision(2) << alpha
          << "  sigma " << sigma << std::defaultfloat << '\n';
    if (!(alpha > 1e-9)) {
      res.status = SolveStatus::NumericalFailure;
      fill_candidate(tau);
      return res;
    }

    for (int b = 0; b < P.nb; ++b) {
      X[b] += alpha * dc.dX[b];
      S[b] += alpha * dc.dS[b];
      X[b] = 0.5 * (X[b] + X[b].transpose()).eval();
      S[b] = 0.5 * (S[b] + S[b].transpose()).eval();
      if (P.bemb[b]) {
        jproject(X[b]);
        jproject(S[b]);
      }
    }
    u += alpha * dc.du;
    s += alpha * dc.ds;
    y += alpha * dc.dy;
    tau += alpha * dc.dtau;
    kappa += alpha * dc.dkappa;
  }
}

}  // namespace sdopf
