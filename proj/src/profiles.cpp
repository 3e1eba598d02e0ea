#include "sdopf/profiles.hpp"

#include <cmath>

#include "json.hpp"

namespace sdopf {

double GaussianStream::uniform(bool open_at_zero) {
  // 53 uniform bits; shifting by one ULP keeps log() off exact zero.
  std::uint64_t bits = eng_() >> 11;
  return (static_cast<double>(bits) + (open_at_zero ? 1.0 : 0.0)) * 0x1.0p-53;
}

double GaussianStream::next() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform(true), u2 = uniform(false);
  double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * kPi * u2);
  have_spare_ = true;
  return r * std::cos(2.0 * kPi * u2);
}

RVec residential_shape() {
  RVec s(24);
  s << 1.00, 0.99, 0.96, 0.90, 0.80, 0.68, 0.58, 0.51, 0.46, 0.43, 0.42, 0.44,  //
      0.50, 0.58, 0.65, 0.66, 0.64, 0.62, 0.61, 0.60, 0.60, 0.62, 0.68, 0.85;
  return s;
}

RVec commercial_shape() {
  RVec s(24);
  s << 0.55, 0.45, 0.38, 0.33, 0.29, 0.26, 0.24, 0.23, 0.22, 0.22, 0.23, 0.26,  //
      0.34, 0.55, 0.78, 0.92, 0.98, 1.00, 0.99, 1.00, 0.98, 0.94, 0.85, 0.70;
  return s;
}

NodeSeries gen_profiles(const std::array<double, 3>& base_p, const std::array<double, 3>& base_q,
                        const RVec& shape, double sigma, GaussianStream& g) {
  const Eigen::Index T = shape.size();
  NodeSeries out;
  for (auto& v : out.p) v.setZero(T);
  for (auto& v : out.q) v.setZero(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    double mult = std::max(0.0, 1.0 + sigma * g.next()) * shape[t];
    for (size_t ph = 0; ph < 3; ++ph) {
      out.p[ph][t] = base_p[ph] * mult;
      out.q[ph][t] = base_q[ph] * mult;
    }
  }
  return out;
}

namespace {

// Peak demands [kW, kVAr] per phase for the bundled example feeder, rows in
// node order. Node "9" is the commercial service; everything else follows the
// residential shape.
struct PeakRow {
  const char* node;
  double p[3], q[3];
};
constexpr PeakRow kExamplePeaks[] = {
    {"3", {96, 72, 72}, {66, 54, 54}},
    {"4", {0, 102, 0}, {0, 75, 0}},
    {"5", {291, 41, 174}, {114, 36, 127}},
    {"6", {0, 69, 69}, {0, 40, 40}},
    {"8", {0, 0, 102}, {0, 0, 48}},
    {"9", {120, 120, 120}, {70, 70, 70}},
    {"10", {0, 0, 102}, {0, 0, 91}},
    {"11", {77, 0, 0}, {52, 0, 0}},
    {"12", {241, 271, 301}, {138, 155, 173}},
};

// Feed price per slot, cheap overnight and above the generator cost from
// 8 AM through 11 PM (slot 1 = the 6 PM hour).
constexpr double kExampleKappa[24] = {44, 41, 38, 35, 32, 26, 24, 22, 20, 19, 19.5, 21,
                                      23, 27, 31, 33, 36, 39, 41, 42, 40,  43, 47, 45};

constexpr double kExampleBaseKva = 5000.0;

}  // namespace

std::string example_scenario_json(std::uint64_t seed, double sigma, double scale) {
  using ordered = nlohmann::ordered_json;
  const int T = 24;
  const double to_pu = 3.0 / kExampleBaseKva;  // kW on the per-phase base

  ordered root;
  root["T"] = T;
  root["dt_hours"] = 1.0;
  ordered kappa = ordered::array();
  for (double k : kExampleKappa) kappa.push_back(k);
  root["kappa"] = std::move(kappa);
  ordered cost_row = ordered::array();
  for (int t = 0; t < T; ++t) cost_row.push_back(30.0);
  root["dg_cost"] = ordered::array({cost_row, cost_row});

  GaussianStream g(seed);
  const RVec res = residential_shape(), com = commercial_shape();
  ordered loads;
  for (const PeakRow& row : kExamplePeaks) {
    std::array<double, 3> bp{}, bq{};
    for (size_t ph = 0; ph < 3; ++ph) {
      bp[ph] = row.p[ph] * scale * to_pu;
      bq[ph] = row.q[ph] * scale * to_pu;
    }
    NodeSeries series =
        gen_profiles(bp, bq, std::string(row.node) == "9" ? com : res, sigma, g);
    ordered per_phase;
    for (int ph = 0; ph < 3; ++ph) {
      if (bp[static_cast<size_t>(ph)] == 0 && bq[static_cast<size_t>(ph)] == 0) continue;
      ordered pq;
      ordered pv = ordered::array(), qv = ordered::array();
      for (int t = 0; t < T; ++t) {
        pv.push_back(series.p[static_cast<size_t>(ph)][t]);
        qv.push_back(series.q[static_cast<size_t>(ph)][t]);
      }
      pq["p"] = std::move(pv);
      pq["q"] = std::move(qv);
      per_phase[std::string(1, phase_letter(ph))] = std::move(pq);
    }
    loads[row.node] = std::move(per_phase);
  }
  root["loads"] = std::move(loads);

  root["pcc"] = ordered{{"vmag", 1.02}, {"angles_deg", ordered::array({0.0, 120.0, -120.0})}};
  root["pcc_min_pf"] = 0.8;
  root["w_v"] = 0.5;
  root["v_ref"] = 1.0;
  return root.dump(1) + "\n";
}

}  // namespace sdopf
