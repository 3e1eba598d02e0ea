#pragma once

#include <random>

#include "sdopf/feeder.hpp"
#include "sdopf/network.hpp"

namespace sdopf::testing {

inline std::mt19937& rng(unsigned seed = 0) {
  static std::mt19937 gen(12345);
  if (seed) gen.seed(seed);
  return gen;
}

inline double urand(double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng());
}

inline Complex crand(double scale = 1.0) { return {scale * urand(), scale * urand()}; }

inline CVec random_cvec(int n, double scale = 1.0) {
  CVec v(n);
  for (int i = 0; i < n; ++i) v[i] = crand(scale);
  return v;
}

/// Random complex symmetric matrix with a dominant diagonal (well conditioned,
/// positive resistance-like real part).
inline CMat random_symmetric(int n, double diag = 1.0) {
  CMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const Complex v = crand(0.2);
      m(i, j) = v;
      m(j, i) = v;
    }
  for (int i = 0; i < n; ++i) m(i, i) += Complex(diag, diag);
  return m;
}

/// Single-phase (phase a) two-bus feeder: PCC "0" -- "1".
inline FeederModel two_bus(Complex z = {0.05, 0.10}) {
  FeederModel f;
  f.nodes.resize(2);
  f.nodes[0].id = "0";
  f.nodes[0].phases = PhaseSet::parse("a");
  f.nodes[1].id = "1";
  f.nodes[1].phases = PhaseSet::parse("a");
  LineSegment ln;
  ln.from = "0";
  ln.to = "1";
  ln.phases = PhaseSet::parse("a");
  ln.z_phase = CMat::Constant(1, 1, z);
  f.lines.push_back(ln);
  return f;
}

/// Three-bus mixed-phase radial feeder:
///   0 (abc) --[3ph]-- 1 (abc) --[1ph c]-- 2 (c)
inline FeederModel mixed_three_bus(bool with_shunt = true) {
  FeederModel f;
  f.nodes.resize(3);
  f.nodes[0].id = "0";
  f.nodes[0].phases = PhaseSet::all();
  f.nodes[1].id = "1";
  f.nodes[1].phases = PhaseSet::all();
  f.nodes[2].id = "2";
  f.nodes[2].phases = PhaseSet::parse("c");

  LineSegment trunk;
  trunk.from = "0";
  trunk.to = "1";
  trunk.phases = PhaseSet::all();
  trunk.z_phase = CMat(3, 3);
  trunk.z_phase << Complex(0.04, 0.11), Complex(0.015, 0.05), Complex(0.016, 0.042),
      Complex(0.015, 0.05), Complex(0.038, 0.115), Complex(0.014, 0.04), Complex(0.016, 0.042),
      Complex(0.014, 0.04), Complex(0.039, 0.112);
  if (with_shunt) {
    trunk.y_shunt = CMat::Zero(3, 3);
    trunk.y_shunt(0, 0) = Complex(0, 0.02);
    trunk.y_shunt(1, 1) = Complex(0, 0.018);
    trunk.y_shunt(2, 2) = Complex(0, 0.019);
    trunk.y_shunt(0, 1) = trunk.y_shunt(1, 0) = Complex(0, -0.004);
    trunk.y_shunt(1, 2) = trunk.y_shunt(2, 1) = Complex(0, -0.003);
  }
  f.lines.push_back(trunk);

  LineSegment lat;
  lat.from = "1";
  lat.to = "2";
  lat.phases = PhaseSet::parse("c");
  lat.z_phase = CMat::Constant(1, 1, Complex(0.09, 0.07));
  if (with_shunt) lat.y_shunt = CMat::Constant(1, 1, Complex(0, 0.005));
  f.lines.push_back(lat);
  return f;
}

/// Flat scenario skeleton (no loads) for validation calls.
inline HorizonScenario flat_scenario(int T = 1, Complex va = {1.0, 0.0}) {
  HorizonScenario s;
  s.T = T;
  s.dt_hours = 1.0;
  s.kappa = RVec::Constant(T, 10.0);
  s.pcc_voltage = CMat(3, T);
  for (int t = 0; t < T; ++t) {
    s.pcc_voltage(0, t) = va;
    s.pcc_voltage(1, t) = va * std::polar(1.0, deg2rad(120));
    s.pcc_voltage(2, t) = va * std::polar(1.0, deg2rad(-120));
  }
  return s;
}

/// Direct per-node evaluation of the π-model current balance: for every
/// (node, phase), the injected current equals the sum over incident lines of
/// (½Y_s + Z^-1) v_self - Z^-1 v_other, restricted to the line's phases.
/// Independent oracle for the admittance assembly.
inline CVec direct_injection_currents(const FeederModel& f, const IndexMap& ix, const CVec& v) {
  CVec i = CVec::Zero(ix.n);
  for (const LineSegment& ln : f.lines) {
    const int m = f.node_index(ln.from), n = f.node_index(ln.to);
    const std::vector<int> ph = ln.phases.list();
    const int k = static_cast<int>(ph.size());
    CVec vm(k), vn(k);
    for (int a = 0; a < k; ++a) {
      vm[a] = v[ix(m, ph[static_cast<size_t>(a)])];
      vn[a] = v[ix(n, ph[static_cast<size_t>(a)])];
    }
    const CMat zinv = ln.z_phase.inverse();
    const CMat ys = ln.y_shunt.size() ? ln.y_shunt : CMat::Zero(k, k);
    const CVec im = (zinv + 0.5 * ys) * vm - zinv * vn;
    const CVec in = (zinv + 0.5 * ys) * vn - zinv * vm;
    for (int a = 0; a < k; ++a) {
      i[ix(m, ph[static_cast<size_t>(a)])] += im[a];
      i[ix(n, ph[static_cast<size_t>(a)])] += in[a];
    }
  }
  return i;
}

}  // namespace sdopf::testing
