#include <doctest.h>

#include "fixtures.hpp"
#include "sdopf/kron.hpp"
#include "sdopf/network.hpp"

using namespace sdopf;
using namespace sdopf::testing;

namespace {

double quad(const CMat& phi, const CVec& x) {
  return std::real(Complex(x.adjoint() * phi * x));
}

CVec pcc_phasors(double mag = 1.0) {
  CVec p(3);
  p << Complex(mag, 0.0), mag * std::polar(1.0, deg2rad(-120)), mag * std::polar(1.0, deg2rad(120));
  return p;
}

}  // namespace

TEST_CASE("index map: file order, phases ascending, absent phases rejected") {
  const FeederModel f = mixed_three_bus();
  const IndexMap ix = build_index(f);
  CHECK(ix.n == 7);
  CHECK(ix(0, 0) == 0);
  CHECK(ix(0, 2) == 2);
  CHECK(ix(1, 1) == 4);
  CHECK(ix(2, 2) == 6);
  CHECK(ix.owner[6] == std::pair<int, int>(2, 2));
  CHECK(ix.has(2, 2));
  CHECK_FALSE(ix.has(2, 0));
  CHECK_THROWS_AS(ix(2, 0), InputError);
}

TEST_CASE("admittance: single full-phase line has the two-port block form") {
  FeederModel f;
  f.nodes.resize(2);
  f.nodes[0].id = "0";
  f.nodes[0].phases = PhaseSet::all();
  f.nodes[1].id = "1";
  f.nodes[1].phases = PhaseSet::all();
  LineSegment ln;
  ln.from = "0";
  ln.to = "1";
  ln.phases = PhaseSet::all();
  rng(201);
  ln.z_phase = random_symmetric(3);
  f.lines.push_back(ln);

  const IndexMap ix = build_index(f);
  const CMat y = build_system_admittance(f, ix);
  const CMat zinv = ln.z_phase.inverse();
  CHECK((y.topLeftCorner(3, 3) - zinv).norm() < 1e-12 * zinv.norm());
  CHECK((y.bottomRightCorner(3, 3) - zinv).norm() < 1e-12 * zinv.norm());
  CHECK((y.topRightCorner(3, 3) + zinv).norm() < 1e-12 * zinv.norm());

  // Shunt charging splits evenly across the two ends.
  ln.y_shunt = CMat::Zero(3, 3);
  ln.y_shunt(0, 0) = Complex(0, 0.06);
  ln.y_shunt(1, 2) = ln.y_shunt(2, 1) = Complex(0, -0.01);
  f.lines[0] = ln;
  const CMat ys = build_system_admittance(f, ix);
  CHECK((ys.topLeftCorner(3, 3) - (zinv + 0.5 * ln.y_shunt)).norm() < 1e-12);
  CHECK((ys.topRightCorner(3, 3) + zinv).norm() < 1e-12);
}

TEST_CASE("admittance: exactly symmetric") {
  const FeederModel f = mixed_three_bus();
  const IndexMap ix = build_index(f);
  const CMat y = build_system_admittance(f, ix);
  CHECK((y - y.transpose()).norm() == 0.0);
}

TEST_CASE("admittance: i = Yv matches per-line current balance on random voltages") {
  const FeederModel f = mixed_three_bus();
  const IndexMap ix = build_index(f);
  const CMat y = build_system_admittance(f, ix);
  rng(202);
  for (int trial = 0; trial < 10; ++trial) {
    const CVec v = random_cvec(ix.n);
    const CVec i_y = y * v;
    const CVec i_direct = direct_injection_currents(f, ix, v);
    CHECK((i_y - i_direct).norm() < 1e-12 * i_direct.norm());
  }
}

TEST_CASE("pcc scaling vector") {
  const FeederModel f = mixed_three_bus();
  const IndexMap ix = build_index(f);
  const CVec a0 = build_pcc_scaling(f, ix, pcc_phasors(1.02));
  CHECK(std::abs(a0[0] - Complex(1.02, 0.0)) < 1e-15);
  CHECK(std::abs(std::abs(a0[2]) - 1.02) < 1e-15);
  for (int k = 3; k < ix.n; ++k) CHECK(a0[k] == Complex(1.0, 0.0));
}

TEST_CASE("injection matrices: hermitian and reproduce power/voltage quadratics") {
  const FeederModel f = mixed_three_bus();
  const IndexMap ix = build_index(f);
  const CMat y = build_system_admittance(f, ix);
  const CVec a0 = build_pcc_scaling(f, ix, pcc_phasors(1.02));

  rng(203);
  for (int r = 0; r < ix.n; ++r) {
    const PhiTriplet phi = build_phi_triplet(y, a0, r);
    CHECK((phi.P - phi.P.adjoint()).norm() < 1e-14);
    CHECK((phi.Q - phi.Q.adjoint()).norm() < 1e-14);
    CHECK((phi.V - phi.V.adjoint()).norm() < 1e-14);

    for (int trial = 0; trial < 100; ++trial) {
      const CVec x = random_cvec(ix.n);
      const CVec v = a0.array() * x.array();
      const CVec i = y * v;
      const Complex s = v[r] * std::conj(i[r]);
      const double scale = std::abs(s) + 1.0;
      CHECK(std::abs(quad(phi.P, x) - s.real()) < 1e-10 * scale);
      CHECK(std::abs(quad(phi.Q, x) - s.imag()) < 1e-10 * scale);
      CHECK(std::abs(quad(phi.V, x) - std::norm(v[r])) < 1e-10 * (std::norm(v[r]) + 1.0));
    }
  }

  const auto all = build_all_phis(y, a0);
  CHECK(all.size() == static_cast<size_t>(ix.n));
  for (int r = 0; r < ix.n; ++r)
    CHECK(std::abs(all[static_cast<size_t>(r)].V(r, r) - Complex(std::norm(a0[r]), 0)) < 1e-14);
}

TEST_CASE("injection matrices: total real power balances series losses") {
  // Shunts here are purely susceptive, so summing the real injection over all
  // terminals must reproduce the series I^2 R losses exactly.
  const FeederModel f = mixed_three_bus();
  const IndexMap ix = build_index(f);
  const CMat y = build_system_admittance(f, ix);
  const CVec a0 = build_pcc_scaling(f, ix, pcc_phasors());
  const auto all = build_all_phis(y, a0);

  rng(204);
  for (int trial = 0; trial < 10; ++trial) {
    const CVec x = random_cvec(ix.n);
    double total_p = 0.0;
    for (int r = 0; r < ix.n; ++r) total_p += quad(all[static_cast<size_t>(r)].P, x);

    const CVec v = a0.array() * x.array();
    double loss = 0.0;
    for (const LineSegment& ln : f.lines) {
      const int m = f.node_index(ln.from), n = f.node_index(ln.to);
      const std::vector<int> ph = ln.phases.list();
      const int k = static_cast<int>(ph.size());
      CVec dv(k);
      for (int a = 0; a < k; ++a)
        dv[a] = v[ix(m, ph[static_cast<size_t>(a)])] - v[ix(n, ph[static_cast<size_t>(a)])];
      const CVec is = ln.z_phase.inverse() * dv;
      loss += (dv.array() * is.array().conjugate()).sum().real();
    }
    CHECK(std::abs(total_p - loss) < 1e-10 * (std::abs(loss) + 1.0));
  }
}

TEST_CASE("line current matrix: reproduces squared phase current") {
  const FeederModel f = mixed_three_bus();
  const IndexMap ix = build_index(f);
  const CVec a0 = build_pcc_scaling(f, ix, pcc_phasors(1.02));

  rng(205);
  for (size_t li = 0; li < f.lines.size(); ++li) {
    const LineSegment& ln = f.lines[li];
    const int m = f.node_index(ln.from), n = f.node_index(ln.to);
    const std::vector<int> ph = ln.phases.list();
    const CMat zinv = ln.z_phase.inverse();
    for (size_t a = 0; a < ph.size(); ++a) {
      const CMat phi = build_line_current_matrix(f, ix, static_cast<int>(li), ph[a], a0);
      CHECK((phi - phi.adjoint()).norm() < 1e-14);
      for (int trial = 0; trial < 20; ++trial) {
        const CVec x = random_cvec(ix.n);
        const CVec v = a0.array() * x.array();
        CVec dv(static_cast<int>(ph.size()));
        for (size_t b = 0; b < ph.size(); ++b)
          dv[static_cast<int>(b)] = v[ix(m, ph[b])] - v[ix(n, ph[b])];
        const Complex i_phase = (zinv * dv)(static_cast<int>(a));
        CHECK(std::abs(quad(phi, x) - std::norm(i_phase)) < 1e-10 * (std::norm(i_phase) + 1.0));
      }
    }
  }
  CHECK_THROWS_AS(build_line_current_matrix(f, ix, 1, 0, a0), InputError);  // lateral has no phase a
  CHECK(line_loss_weight(f.lines[0], 1) == doctest::Approx(f.lines[0].z_phase(1, 1).real()));
}

TEST_CASE("neutral current matrix: reproduces the eliminated conductor current") {
  // Build the lateral's impedance from a 4-wire primitive so the neutral
  // recovery map is available, then check the quadratic form against a direct
  // evaluation of the eliminated current.
  FeederModel f = mixed_three_bus(false);
  rng(206);
  const CMat prim = random_symmetric(4);
  const KronResult kr = kron_reduce(prim, 3);
  f.lines[0].z_phase = kr.z_phase;
  f.lines[0].t_neutral = kr.t_neutral;

  const IndexMap ix = build_index(f);
  const CVec a0 = build_pcc_scaling(f, ix, pcc_phasors());
  const CMat phi = build_neutral_current_matrix(f, ix, 0, 0, a0);
  CHECK((phi - phi.adjoint()).norm() < 1e-14);

  const CMat zinv = kr.z_phase.inverse();
  for (int trial = 0; trial < 20; ++trial) {
    const CVec x = random_cvec(ix.n);
    const CVec v = a0.array() * x.array();
    CVec dv(3);
    for (int b = 0; b < 3; ++b) dv[b] = v[ix(0, b)] - v[ix(1, b)];
    const Complex i_n = (kr.t_neutral * (zinv * dv))(0);
    CHECK(std::abs(quad(phi, x) - std::norm(i_n)) < 1e-10 * (std::norm(i_n) + 1.0));
  }

  CHECK_THROWS_AS(build_neutral_current_matrix(f, ix, 1, 0, a0), InputError);  // lateral lacks map
}

TEST_CASE("neutral current vanishes for balanced flow under symmetric coupling") {
  // Primitive with identical phase-to-neutral mutuals: the eliminated current
  // is proportional to the zero-sequence component, so balanced positive-
  // sequence flow produces none.
  FeederModel f = mixed_three_bus(false);
  CMat prim(4, 4);
  const Complex zs(0.35, 1.0), zm(0.15, 0.5), zpn(0.1, 0.45), znn(0.5, 1.3);
  prim.setConstant(zm);
  for (int i = 0; i < 3; ++i) {
    prim(i, i) = zs;
    prim(i, 3) = zpn;
    prim(3, i) = zpn;
  }
  prim(3, 3) = znn;
  const KronResult kr = kron_reduce(prim, 3);
  f.lines[0].z_phase = kr.z_phase;
  f.lines[0].t_neutral = kr.t_neutral;

  const IndexMap ix = build_index(f);
  const CVec a0 = build_pcc_scaling(f, ix, pcc_phasors());
  const CMat phi = build_neutral_current_matrix(f, ix, 0, 0, a0);

  // Voltages that drive a balanced series current through the trunk.
  CVec i_bal(3);
  i_bal << Complex(1.0, 0.0), std::polar(1.0, deg2rad(-120)), std::polar(1.0, deg2rad(120));
  CVec v = CVec::Ones(ix.n);
  for (int b = 0; b < 3; ++b) v[ix(0, b)] = pcc_phasors()[b];
  const CVec v1 = v.segment(0, 3) - kr.z_phase * i_bal;
  for (int b = 0; b < 3; ++b) v[ix(1, b)] = v1[b];
  const CVec x = v.array() / a0.array();
  CHECK(quad(phi, x) < 1e-20);
}
