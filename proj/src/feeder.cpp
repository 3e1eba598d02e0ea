#include "sdopf/feeder.hpp"

#include <Eigen/LU>

#include <cmath>
#include <set>
#include <sstream>

namespace sdopf {
namespace {

bool finite(double x) { return std::isfinite(x); }

template <typename... A>
std::string cat(A&&... a) {
  std::ostringstream os;
  (os << ... << a);
  return os.str();
}

}  // namespace

std::vector<std::string> validate_feeder(const FeederModel& model,
                                         const HorizonScenario& scenario) {
  std::vector<std::string> bad;
  auto flag = [&bad](std::string msg) { bad.push_back(std::move(msg)); };

  // --- nodes ---
  if (model.nodes.empty()) {
    flag("feeder has no nodes");
    return bad;
  }
  std::set<std::string> ids;
  for (const NodeSpec& nd : model.nodes) {
    if (!ids.insert(nd.id).second) flag(cat("duplicate node id '", nd.id, "'"));
    if (nd.phases.empty()) flag(cat("node '", nd.id, "' has an empty phase set"));
    if (!(nd.vmin >= 0.0 && nd.vmin < nd.vmax && finite(nd.vmax)))
      flag(cat("node '", nd.id, "' voltage band invalid: [", nd.vmin, ", ", nd.vmax, "]"));
    if (!(nd.min_pf >= 0.0 && nd.min_pf <= 1.0))
      flag(cat("node '", nd.id, "' min_pf outside [0,1]"));
    for (int p = 0; p < 3; ++p)
      if (nd.cap_susceptance[static_cast<size_t>(p)] < 0.0)
        flag(cat("node '", nd.id, "' capacitor susceptance negative on phase ", phase_letter(p)));
    for (double lv : nd.cap_switch_levels)
      if (lv < 0.0 || !finite(lv))
        flag(cat("node '", nd.id, "' capacitor switch level invalid: ", lv));
  }
  if (model.base_kva <= 0.0 || model.base_kv <= 0.0) flag("per-unit bases must be positive");

  // --- lines, radiality ---
  if (model.lines.size() + 1 != model.nodes.size())
    flag(cat("radial feeder needs exactly nodes-1 lines, got ", model.lines.size(), " for ",
             model.nodes.size(), " nodes"));
  std::vector<std::vector<int>> adj(model.nodes.size());
  for (size_t li = 0; li < model.lines.size(); ++li) {
    const LineSegment& ln = model.lines[li];
    const int m = model.node_index(ln.from), n = model.node_index(ln.to);
    if (m < 0) flag(cat("line ", li, " references unknown node '", ln.from, "'"));
    if (n < 0) flag(cat("line ", li, " references unknown node '", ln.to, "'"));
    if (m >= 0 && n >= 0 && m == n) flag(cat("line ", li, " is a self-loop at '", ln.from, "'"));
    if (ln.phases.empty()) flag(cat("line ", li, " has an empty phase set"));
    if (m >= 0 && !ln.phases.subset_of(model.nodes[static_cast<size_t>(m)].phases))
      flag(cat("line ", li, " phases '", ln.phases.str(), "' not carried by node '", ln.from, "'"));
    if (n >= 0 && !ln.phases.subset_of(model.nodes[static_cast<size_t>(n)].phases))
      flag(cat("line ", li, " phases '", ln.phases.str(), "' not carried by node '", ln.to, "'"));
    const int k = ln.phases.count();
    if (ln.z_phase.rows() != k || ln.z_phase.cols() != k)
      flag(cat("line ", li, " impedance must be ", k, "x", k));
    else {
      Eigen::FullPivLU<CMat> lu(ln.z_phase);
      if (!lu.isInvertible()) flag(cat("line ", li, " series impedance is singular"));
      if ((ln.z_phase - ln.z_phase.transpose()).norm() > 1e-9 * (1.0 + ln.z_phase.norm()))
        flag(cat("line ", li, " series impedance is not symmetric"));
    }
    if (ln.y_shunt.size() != 0 &&
        (ln.y_shunt - ln.y_shunt.transpose()).norm() > 1e-9 * (1.0 + ln.y_shunt.norm()))
      flag(cat("line ", li, " shunt admittance is not symmetric"));
    if (ln.y_shunt.size() != 0 && (ln.y_shunt.rows() != k || ln.y_shunt.cols() != k))
      flag(cat("line ", li, " shunt admittance must be ", k, "x", k, " (or empty)"));
    if (ln.t_neutral.size() != 0 && ln.t_neutral.cols() != k)
      flag(cat("line ", li, " neutral transform must have ", k, " columns"));
    if (ln.i_max <= 0 || ln.p_loss_max <= 0 || ln.i_neutral_max <= 0)
      flag(cat("line ", li, " limits must be positive (or unset)"));
    if (m >= 0 && n >= 0 && m != n) {
      adj[static_cast<size_t>(m)].push_back(n);
      adj[static_cast<size_t>(n)].push_back(m);
    }
  }
  {  // connectivity from the PCC
    std::vector<char> seen(model.nodes.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[static_cast<size_t>(u)])
        if (!seen[static_cast<size_t>(v)]) {
          seen[static_cast<size_t>(v)] = 1;
          stack.push_back(v);
        }
    }
    for (size_t i = 0; i < seen.size(); ++i)
      if (!seen[i]) flag(cat("node '", model.nodes[i].id, "' is not connected to the PCC"));
  }

  // --- DG units ---
  for (size_t gi = 0; gi < model.dg.size(); ++gi) {
    const DgUnit& g = model.dg[gi];
    const int n = model.node_index(g.node);
    if (n < 0) {
      flag(cat("dg ", gi, " references unknown node '", g.node, "'"));
      continue;
    }
    if (g.phases.empty() || !g.phases.subset_of(model.nodes[static_cast<size_t>(n)].phases))
      flag(cat("dg ", gi, " phases '", g.phases.str(), "' not carried by node '", g.node, "'"));
    if (!(g.pmin <= g.pmax) || !(g.qmin <= g.qmax))
      flag(cat("dg ", gi, " has inverted output bounds"));
  }

  // --- scenario shape ---
  if (scenario.T < 1) flag("scenario slot count must be >= 1");
  if (!(scenario.dt_hours > 0.0)) flag("slot duration must be positive");
  if (scenario.kappa.size() != scenario.T) flag("kappa series length != T");
  for (int t = 0; t < scenario.kappa.size(); ++t)
    if (!finite(scenario.kappa[t])) flag(cat("kappa[", t, "] not finite"));
  if (scenario.dg_cost.size() != 0 &&
      (scenario.dg_cost.rows() != static_cast<Eigen::Index>(model.dg.size()) ||
       scenario.dg_cost.cols() != scenario.T))
    flag("dg_cost must be (#dg) x T");
  if (scenario.pcc_voltage.rows() != 3 || scenario.pcc_voltage.cols() != scenario.T)
    flag("pcc voltage phasors must be 3 x T");
  else {
    const PhaseSet p0 = model.nodes[0].phases;
    for (int t = 0; t < scenario.T; ++t)
      for (int p : p0.list())
        if (!(std::abs(scenario.pcc_voltage(p, t)) > 0.0))
          flag(cat("pcc phasor zero at phase ", phase_letter(p), ", slot ", t + 1));
  }
  if (!(scenario.pcc_min_pf >= 0.0 && scenario.pcc_min_pf <= 1.0)) flag("pcc_min_pf outside [0,1]");
  if (!(scenario.w_v > 0.0 && scenario.w_v < 1.0) && scenario.w_v != 1.0 && scenario.w_v != 0.0)
    flag("w_v outside [0,1]");
  for (const auto* m : {&scenario.load_p, &scenario.load_q})
    for (const auto& [id, series] : *m) {
      const int n = model.node_index(id);
      if (n < 0) {
        flag(cat("load series references unknown node '", id, "'"));
        continue;
      }
      for (int p = 0; p < 3; ++p) {
        const RVec& s = series[static_cast<size_t>(p)];
        if (s.size() == 0) continue;
        if (!model.nodes[static_cast<size_t>(n)].phases.has(p))
          flag(cat("load series at node '", id, "' on absent phase ", phase_letter(p)));
        if (s.size() != scenario.T) flag(cat("load series at node '", id, "' length != T"));
      }
    }

  // --- elastic loads ---
  for (size_t di = 0; di < model.elastic.size(); ++di) {
    const ElasticLoad& d = model.elastic[di];
    const int n = model.node_index(d.node);
    if (n < 0)
      flag(cat("elastic ", di, " references unknown node '", d.node, "'"));
    else if (!model.nodes[static_cast<size_t>(n)].phases.has(d.phase))
      flag(cat("elastic ", di, " on absent phase ", phase_letter(d.phase), " of node '", d.node,
               "'"));
    if (d.energy < 0.0) flag(cat("elastic ", di, " has negative energy requirement"));
    if (d.cap < 0.0) flag(cat("elastic ", di, " has negative power cap"));
    if (!(d.t_start >= 1 && d.t_start <= d.t_end && d.t_end <= scenario.T))
      flag(cat("elastic ", di, " window [", d.t_start, ", ", d.t_end, "] outside horizon"));
    else if (d.cap != kNoCap &&
             d.energy > d.cap * scenario.dt_hours * (d.t_end - d.t_start + 1) + 1e-12)
      flag(cat("elastic ", di, " energy ", d.energy, " exceeds cap*dt*window = ",
               d.cap * scenario.dt_hours * (d.t_end - d.t_start + 1)));
  }

  return bad;
}

}  // namespace sdopf
