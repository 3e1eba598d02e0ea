#include <doctest.h>

#include "fixtures.hpp"
#include "sdopf/loadflow.hpp"

using namespace sdopf;
using namespace sdopf::testing;

namespace {

CVec pcc3(double mag = 1.02) {
  CVec p(3);
  p << Complex(mag, 0.0), mag * std::polar(1.0, deg2rad(-120)), mag * std::polar(1.0, deg2rad(120));
  return p;
}

}  // namespace

TEST_CASE("zbus: zero injections give the linear no-load solution") {
  const FeederModel f = mixed_three_bus();
  const IndexMap ix = build_index(f);
  const CMat y = build_system_admittance(f, ix);
  const CVec v0 = pcc3();
  const CVec v = zbus_fixed_point(y, 3, v0, CVec::Zero(ix.n - 3));
  const CVec expect =
      Eigen::FullPivLU<CMat>(y.bottomRightCorner(ix.n - 3, ix.n - 3)).solve(-y.bottomLeftCorner(ix.n - 3, 3) * v0);
  CHECK((v.head(3) - v0).norm() == 0.0);
  CHECK((v.tail(ix.n - 3) - expect).norm() < 1e-13);
}

TEST_CASE("zbus: fixed point balances power to tolerance") {
  const FeederModel f = mixed_three_bus();
  const IndexMap ix = build_index(f);
  const CMat y = build_system_admittance(f, ix);
  rng(301);
  for (int trial = 0; trial < 10; ++trial) {
    CVec s(ix.n - 3);
    for (int k = 0; k < s.size(); ++k) s[k] = Complex(urand(-0.3, 0.05), urand(-0.15, 0.05));
    const CVec v = zbus_fixed_point(y, 3, pcc3(), s, 1e-12);
    CHECK(power_mismatch(y, 3, v, s) < 1e-10);
    for (int k = 3; k < ix.n; ++k) CHECK(std::abs(v[k]) > 0.8);  // sane operating point
  }
}

TEST_CASE("zbus: two-bus case matches the closed-form voltage drop") {
  const FeederModel f = two_bus();
  const IndexMap ix = build_index(f);
  const CMat y = build_system_admittance(f, ix);
  const Complex v0(1.02, 0.0), z(0.05, 0.10), s_load(0.3, 0.15);

  const CVec v = zbus_fixed_point(y, 1, CVec::Constant(1, v0), CVec::Constant(1, -s_load), 1e-13);

  const Complex w = z * std::conj(s_load);
  const double b = 2.0 * w.real() - std::norm(v0);
  const double u = 0.5 * (-b + std::sqrt(b * b - 4.0 * std::norm(w)));
  const Complex v1 = std::conj((u + w) / v0);
  CHECK(std::abs(v[1] - v1) < 1e-10);
}

TEST_CASE("zbus: collapse reports the last mismatch") {
  const FeederModel f = mixed_three_bus();
  const IndexMap ix = build_index(f);
  const CMat y = build_system_admittance(f, ix);
  const CVec s = CVec::Constant(ix.n - 3, Complex(-50.0, -20.0));
  CHECK_THROWS_WITH_AS(zbus_fixed_point(y, 3, pcc3(), s), doctest::Contains("mismatch"),
                       NumericalError);
}

TEST_CASE("zbus: input checks") {
  const CMat y = CMat::Identity(3, 3);
  CHECK_THROWS_AS(zbus_fixed_point(y, 3, CVec::Ones(3), CVec(0)), InputError);
  CHECK_THROWS_AS(zbus_fixed_point(y, 1, CVec::Ones(2), CVec::Ones(2)), InputError);
}

TEST_CASE("brute force: bare load matches the analytic drop, objective prices the import") {
  FeederModel f = two_bus({0.05, 0.10});
  f.nodes[1].vmin = 0.90;
  f.nodes[1].vmax = 1.05;
  HorizonScenario s = flat_scenario();
  s.pcc_voltage.col(0) *= 1.02;
  s.kappa[0] = 10.0;
  s.load_p["1"][0] = RVec::Constant(1, 0.3);
  s.load_q["1"][0] = RVec::Constant(1, 0.15);

  BruteForceGrid grid;
  grid.n_mag = 201;
  grid.n_ang = 201;
  grid.ang_span = 0.12;
  const BruteForceResult r = brute_force_opf(f, s, grid);
  REQUIRE(r.feasible);

  const Complex v0(1.02, 0.0), z(0.05, 0.10), sl(0.3, 0.15);
  const Complex w = z * std::conj(sl);
  const double b = 2.0 * w.real() - std::norm(v0);
  const double u = 0.5 * (-b + std::sqrt(b * b - 4.0 * std::norm(w)));
  const Complex v1 = std::conj((u + w) / v0);
  const Complex i_line = std::conj(sl / v1);
  const double p_import = (v0 * std::conj(i_line)).real();

  const BruteForceSlot& slot = r.slots[0];
  const double res = 2.0 * (slot.mag_step + 1.05 * slot.ang_step);
  CHECK(std::abs(slot.v[1] - v1) < res);
  // Cost sensitivity per unit voltage is bounded by kappa * |v0| * ||Y||_inf.
  const double lip = 10.0 * 1.02 / std::abs(z);
  CHECK(std::abs(r.objective - 10.0 * p_import) < 2.0 * lip * res);
}

TEST_CASE("brute force: reactive support lifts the optimum onto the lower voltage bound") {
  FeederModel f = two_bus({0.05, 0.10});
  f.nodes[1].vmin = 0.995;
  f.nodes[1].vmax = 1.05;
  DgUnit dg;
  dg.node = "1";
  dg.phases = PhaseSet::parse("a");
  dg.pmin = 0.0;
  dg.pmax = 2.0;
  dg.qmin = -2.0;
  dg.qmax = 2.0;
  f.dg.push_back(dg);

  HorizonScenario s = flat_scenario();
  s.pcc_voltage.col(0) *= 1.02;
  s.kappa[0] = 10.0;
  s.dg_cost = RMat::Constant(1, 1, 12.0);  // pricier than the feed, so imports win
  s.load_p["1"][0] = RVec::Constant(1, 0.8);
  s.load_q["1"][0] = RVec::Constant(1, 0.4);

  BruteForceGrid grid;
  grid.n_mag = 151;
  grid.n_ang = 151;
  grid.ang_span = 0.15;
  const BruteForceResult r = brute_force_opf(f, s, grid);
  REQUIRE(r.feasible);
  const BruteForceSlot& slot = r.slots[0];
  CHECK(std::abs(slot.v[1]) < 0.995 + 2.5 * slot.mag_step);
  CHECK(slot.p_gen[1] < 0.08);  // active power stays with the cheaper import
}

TEST_CASE("brute force: voltage window excluding every balance point is infeasible") {
  FeederModel f = two_bus({0.05, 0.10});
  f.nodes[1].vmin = 1.01;  // the drop under load puts the balance point below this
  f.nodes[1].vmax = 1.05;
  HorizonScenario s = flat_scenario();
  s.pcc_voltage.col(0) *= 1.02;
  s.load_p["1"][0] = RVec::Constant(1, 0.8);
  s.load_q["1"][0] = RVec::Constant(1, 0.4);

  BruteForceGrid grid;
  grid.n_mag = 101;
  grid.n_ang = 101;
  const BruteForceResult r = brute_force_opf(f, s, grid);
  CHECK_FALSE(r.feasible);
  CHECK_FALSE(r.slots[0].feasible);
}

TEST_CASE("brute force: rejects oversized search spaces and elastic loads") {
  const FeederModel big = mixed_three_bus();  // four free rows
  CHECK_THROWS_AS(brute_force_opf(big, flat_scenario()), InputError);

  FeederModel f = two_bus();
  ElasticLoad el;
  el.node = "1";
  el.phase = 0;
  el.energy = 0.1;
  el.t_start = 1;
  el.t_end = 1;
  f.elastic.push_back(el);
  CHECK_THROWS_AS(brute_force_opf(f, flat_scenario()), InputError);
}

TEST_CASE("brute force: slots are independent and objectives add") {
  FeederModel f = two_bus({0.05, 0.10});
  f.nodes[1].vmin = 0.90;
  HorizonScenario s = flat_scenario(2);
  s.pcc_voltage *= 1.02;
  s.kappa << 10.0, 20.0;
  s.load_p["1"][0] = RVec::Constant(2, 0.3);
  s.load_q["1"][0] = RVec::Constant(2, 0.15);

  BruteForceGrid grid;
  grid.n_mag = 101;
  grid.n_ang = 101;
  const BruteForceResult r = brute_force_opf(f, s, grid);
  REQUIRE(r.feasible);
  CHECK(r.slots[1].objective == doctest::Approx(2.0 * r.slots[0].objective).epsilon(1e-9));
  CHECK(r.objective == doctest::Approx(r.slots[0].objective + r.slots[1].objective));
}
