#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "sdopf/types.hpp"

namespace sdopf {

/// Standard-normal stream with a pinned algorithm (64-bit Mersenne engine +
/// Box-Muller), so a seed identifies the exact series produced — the
/// library-provided normal distribution is implementation-defined and would
/// break byte-identical regeneration.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : eng_(seed) {}
  double next();

 private:
  double uniform(bool open_at_zero);
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Peak-normalized 24-slot demand shapes; slot 1 is the hour starting 6 PM,
/// so overnight hours sit in the middle of the horizon and both bundled
/// deferral windows are contiguous. Values approximate typical weekday
/// profiles: an evening-peaked curve for households and a business-hours
/// plateau for commercial service.
RVec residential_shape();
RVec commercial_shape();

/// One node's load series: per-phase P/Q over the horizon.
struct NodeSeries {
  std::array<RVec, 3> p, q;
};

/// Perturbed peak-scaled series: for each slot one multiplier
/// g_t = max(0, 1 + sigma * N(0,1)) is drawn and applied to every phase of
/// the node, identically for P and Q; series_p[phi][t] = base_p[phi] *
/// shape[t] * g_t. Exactly shape.size() draws are consumed per call.
NodeSeries gen_profiles(const std::array<double, 3>& base_p, const std::array<double, 3>& base_q,
                        const RVec& shape, double sigma, GaussianStream& g);

/// Scenario JSON for the bundled 13-node example feeder: 24 hourly slots
/// starting 6 PM, a synthetic price series that is cheap overnight and above
/// the generator cost (30) from 8 AM to 11 PM, constant generator costs, a
/// 1.02 p.u. balanced feed, a 0.8 feed power-factor floor, and per-node load
/// series built from the example's peak table via gen_profiles (the
/// commercial shape on node "9", residential elsewhere; one multiplier
/// stream, table rows in node order). `scale` multiplies every peak load;
/// identical arguments produce byte-identical text.
std::string example_scenario_json(std::uint64_t seed, double sigma = 0.1, double scale = 1.0);

}  // namespace sdopf
