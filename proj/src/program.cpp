#include "sdopf/program.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace sdopf {

int HermitianProgram::count_rows(const std::string& tag) const {
  return static_cast<int>(
      std::count_if(rows.begin(), rows.end(), [&](const Row& r) { return r.tag == tag; }));
}

RMat embed_matrix(const CMat& h) {
  if (h.rows() != h.cols()) throw InputError("embedding needs a square matrix");
  const double scale = h.norm();
  if ((h - h.adjoint()).norm() > 1e-12 * std::max(1.0, scale))
    throw InputError("embedding needs a Hermitian matrix");
  const int n = static_cast<int>(h.rows());
  RMat m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = h.real();
  m.bottomRightCorner(n, n) = h.real();
  m.topRightCorner(n, n) = -h.imag();
  m.bottomLeftCorner(n, n) = h.imag();
  return m;
}

std::vector<SymEntry> embed_entries(const std::vector<CxEntry>& h, int n) {
  std::vector<SymEntry> out;
  out.reserve(4 * h.size());
  for (const CxEntry& e : h) {
    if (e.r > e.c || e.c >= n) throw InputError("Hermitian entry out of range");
    if (e.r == e.c && e.v.imag() != 0.0)
      throw InputError("embedding needs a Hermitian matrix: complex diagonal");
    const double re = 0.5 * e.v.real(), im = 0.5 * e.v.imag();
    if (re != 0.0) {
      out.push_back({e.r, e.c, re});
      out.push_back({n + e.r, n + e.c, re});
    }
    if (im != 0.0) {
      out.push_back({e.r, n + e.c, -im});
      out.push_back({e.c, n + e.r, im});
    }
  }
  return out;
}

ConicProgram real_embedding(const HermitianProgram& hp) {
  ConicProgram p;
  p.blocks.reserve(static_cast<size_t>(hp.T) + hp.aux_group.size());
  for (int t = 0; t < hp.T; ++t) p.blocks.push_back({2 * hp.n, true, t});
  const int aux_base = hp.T;
  for (int g : hp.aux_group) p.blocks.push_back({2, false, g});

  for (const HermitianProgram::Scalar& s : hp.scalars) p.scalars.push_back({s.name, s.group});

  auto lower_aux = [](const RMat& a) {
    std::vector<SymEntry> out;
    for (int r = 0; r < a.rows(); ++r)
      for (int c = r; c < a.cols(); ++c)
        if (a(r, c) != 0.0) out.push_back({r, c, a(r, c)});
    return out;
  };

  for (const HermitianProgram::Row& row : hp.rows) {
    ConicProgram::Row out;
    out.rhs = row.rhs;
    out.group = row.group;
    out.tag = row.tag;
    for (const auto& [slot, entries] : row.cx)
      out.terms.push_back({slot, embed_entries(entries, hp.n)});
    for (const auto& [blk, coeff] : row.aux) out.terms.push_back({aux_base + blk, lower_aux(coeff)});
    out.lin = row.lin;
    if (row.kind == RowKind::Le) {
      p.scalars.push_back({"slack:" + row.tag, row.group});
      out.lin.emplace_back(static_cast<int>(p.scalars.size()) - 1, 1.0);
    }
    p.rows.push_back(std::move(out));
  }

  for (int t = 0; t < hp.T; ++t) {
    if (hp.obj.empty()) break;
    const std::vector<CxEntry> entries = dense_to_cx(hp.obj[static_cast<size_t>(t)]);
    if (entries.empty()) continue;
    p.obj_blocks.push_back({t, embed_entries(entries, hp.n)});
  }
  p.obj_lin = hp.obj_lin;
  return p;
}

std::vector<std::string> validate_program(const ConicProgram& p) {
  std::vector<std::string> bad;
  auto flag = [&](const std::string& m) {
    if (bad.size() < 32) bad.push_back(m);
  };
  for (const ConicProgram::Block& b : p.blocks)
    if (b.dim < 1 || (b.embedded && b.dim % 2)) flag("bad block dimension");
  auto check_term = [&](const ConicProgram::Term& t) {
    if (t.block < 0 || t.block >= static_cast<int>(p.blocks.size())) {
      flag("term references undeclared block");
      return;
    }
    const int dim = p.blocks[static_cast<size_t>(t.block)].dim;
    for (const SymEntry& e : t.entries) {
      if (e.r < 0 || e.r > e.c || e.c >= dim) flag("entry outside upper triangle");
      if (!std::isfinite(e.v)) flag("non-finite entry");
    }
  };
  auto check_lin = [&](const std::pair<int, double>& l) {
    if (l.first < 0 || l.first >= static_cast<int>(p.scalars.size()))
      flag("term references undeclared scalar");
    if (!std::isfinite(l.second)) flag("non-finite scalar coefficient");
  };
  for (const ConicProgram::Row& r : p.rows) {
    for (const ConicProgram::Term& t : r.terms) check_term(t);
    for (const auto& l : r.lin) check_lin(l);
    if (!std::isfinite(r.rhs)) flag("non-finite rhs");
  }
  for (const ConicProgram::Term& t : p.obj_blocks) check_term(t);
  for (const auto& l : p.obj_lin) check_lin(l);
  return bad;
}

void export_program(const ConicProgram& p, std::ostream& os) {
  os << "# blocks: index dim kind\n";
  for (size_t b = 0; b < p.blocks.size(); ++b)
    os << "block " << b << ' ' << p.blocks[b].dim << (p.blocks[b].embedded ? " embedded\n" : " plain\n");
  os << "scalars " << p.scalars.size() << "\n";
  os << "# objective: min sum of entries times S, plus scalar terms\n";
  for (const ConicProgram::Term& t : p.obj_blocks)
    for (const SymEntry& e : t.entries)
      os << "obj " << t.block << ' ' << e.r << ' ' << e.c << ' ' << e.v << '\n';
  for (const auto& [v, c] : p.obj_lin) os << "objscalar " << v << ' ' << c << '\n';
  os << "# constraints: <A_i, S> + a_i.x = b_i; off-diagonal entries count twice\n";
  for (size_t i = 0; i < p.rows.size(); ++i) {
    const ConicProgram::Row& r = p.rows[i];
    for (const ConicProgram::Term& t : r.terms)
      for (const SymEntry& e : t.entries)
        os << "con " << i << ' ' << t.block << ' ' << e.r << ' ' << e.c << ' ' << e.v << '\n';
    for (const auto& [v, c] : r.lin) os << "conscalar " << i << ' ' << v << ' ' << c << '\n';
    os << "rhs " << i << ' ' << r.rhs << '\n';
  }
  os << "# structure: embedded blocks satisfy S(r,c)=S(n+r,n+c) and S(r,n+c)=-S(c,n+r)\n";
  size_t row_id = p.rows.size();
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    if (!p.blocks[b].embedded) continue;
    const int n = p.blocks[b].dim / 2;
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) {
        os << "con " << row_id << ' ' << b << ' ' << r << ' ' << c << ' ' << 1.0 << '\n'
           << "con " << row_id << ' ' << b << ' ' << n + r << ' ' << n + c << ' ' << -1.0 << '\n'
           << "rhs " << row_id << " 0\n";
        ++row_id;
        if (c == r) continue;
        os << "con " << row_id << ' ' << b << ' ' << r << ' ' << n + c << ' ' << 1.0 << '\n'
           << "con " << row_id << ' ' << b << ' ' << c << ' ' << n + r << ' ' << 1.0 << '\n'
           << "rhs " << row_id << " 0\n";
        ++row_id;
      }
    // the diagonal of the off-diagonal quadrant vanishes
    for (int r = 0; r < n; ++r) {
      os << "con " << row_id << ' ' << b << ' ' << r << ' ' << n + r << ' ' << 1.0 << '\n'
         << "rhs " << row_id << " 0\n";
      ++row_id;
    }
  }
}

CMat cx_to_dense(const std::vector<CxEntry>& entries, int n) {
  CMat h = CMat::Zero(n, n);
  for (const CxEntry& e : entries) {
    h(e.r, e.c) += e.v;
    if (e.r != e.c) h(e.c, e.r) += std::conj(e.v);
  }
  return h;
}

std::vector<CxEntry> dense_to_cx(const CMat& h) {
  std::vector<CxEntry> out;
  const int n = static_cast<int>(h.rows());
  for (int r = 0; r < n; ++r)
    for (int c = r; c < n; ++c)
      if (h(r, c) != Complex(0, 0)) out.push_back({r, c, h(r, c)});
  return out;
}

double herm_dot(const std::vector<CxEntry>& h, const CMat& x) {
  double acc = 0.0;
  for (const CxEntry& e : h)
    acc += (e.r == e.c) ? e.v.real() * x(e.r, e.r).real()
                        : 2.0 * (e.v * x(e.c, e.r)).real();
  return acc;
}

double sym_dot(const std::vector<SymEntry>& a, const RMat& s) {
  double acc = 0.0;
  for (const SymEntry& e : a) acc += (e.r == e.c) ? e.v * s(e.r, e.r) : 2.0 * e.v * s(e.r, e.c);
  return acc;
}

RMat sym_to_dense(const std::vector<SymEntry>& entries, int dim) {
  RMat s = RMat::Zero(dim, dim);
  for (const SymEntry& e : entries) {
    s(e.r, e.c) += e.v;
    if (e.r != e.c) s(e.c, e.r) += e.v;
  }
  return s;
}

}  // namespace sdopf
