#include "sdopf/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>
#include <utility>

#include "sdopf/loadflow.hpp"
#include "sdopf/solver.hpp"

namespace sdopf {

namespace {

template <class... Ts>
std::string cat(const Ts&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}

std::ostream& log_stream(const CliOptions& opt) { return opt.log ? *opt.log : std::clog; }

void say(const CliOptions& opt, int level, const std::string& msg) {
  if (opt.log_level >= level) log_stream(opt) << msg << '\n';
}

std::string status_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::PrimalInfeasible: return "infeasible";
    case SolveStatus::DualInfeasible: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration_limit";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "numerical_failure";
}

int solve_exit(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return 0;
    case SolveStatus::PrimalInfeasible: return 3;
    default: return 5;
  }
}

ConstraintFlags effective_flags(const CliOptions& opt) {
  return opt.enable.value_or(ConstraintFlags{true, true, true, true});
}

std::vector<std::string> family_names(const ConstraintFlags& f) {
  std::vector<std::string> out;
  if (f.thermal) out.push_back("thermal");
  if (f.neutral) out.push_back("neutral");
  if (f.pcc_pf) out.push_back("pcc-pf");
  if (f.node_pf) out.push_back("node-pf");
  return out;
}

struct Inputs {
  FeederModel model;
  HorizonScenario scenario;
  SystemMatrices m;
};

Inputs ingest(const CliOptions& opt) {
  Inputs in;
  in.model = load_feeder(opt.feeder_path);
  in.scenario = load_scenario(opt.scenario_path);
  std::vector<std::string> bad = validate_feeder(in.model, in.scenario);
  if (!bad.empty()) {
    std::string msg = "inconsistent inputs:";
    for (const std::string& b : bad) msg += "\n  " + b;
    throw InputError(msg);
  }
  in.m = build_system_matrices(in.model, in.scenario);
  return in;
}

RunReport base_report(const CliOptions& opt, const std::string& mode) {
  RunReport rep;
  rep.mode = mode;
  rep.feeder_path = opt.feeder_path;
  rep.scenario_path = opt.scenario_path;
  rep.tol = opt.tol;
  rep.rank_threshold = opt.rank_threshold;
  rep.seed = opt.seed;
  rep.enabled = family_names(effective_flags(opt));
  return rep;
}

int feed_rows(const IndexMap& ix) {
  int n0 = 0;
  while (n0 < ix.n && ix.owner[static_cast<size_t>(n0)].first == 0) ++n0;
  return n0;
}

SolverConfig solver_config(const CliOptions& opt) {
  SolverConfig cfg;
  cfg.tol = opt.tol;
  cfg.verbose = opt.log_level >= 2;
  cfg.log = opt.log;
  return cfg;
}

RecoveryConfig recovery_config(const CliOptions& opt) {
  RecoveryConfig cfg;
  cfg.rank_threshold = opt.rank_threshold;
  // the feed-anchor residual of a tolerance-accurate relaxation scales with
  // the subdominant eigenvalue, not with machine precision
  cfg.anchor_tol = 1e-4;
  return cfg;
}

/// Schedule sections of the report, converted onto the per-phase kVA base.
void fill_schedule(RunReport& rep, const StoredSolution& s, const SystemMatrices& m,
                   const FeederModel& model) {
  const double sb = model.s_base_kva_per_phase();
  rep.tight = s.tight;
  rep.rank_ratio = s.rank_ratio;
  rep.pcc_phase.clear();
  for (int r = 0; r < feed_rows(m.index); ++r)
    rep.pcc_phase.push_back(phase_letter(m.index.owner[static_cast<size_t>(r)].second));
  rep.p0_kw = s.p0 * sb;
  rep.q0_kvar = s.q0 * sb;
  rep.pf0 = s.pf0;
  rep.dg.clear();
  for (const StoredSolution::Dg& g : s.dg) {
    RunReport::DgSchedule d;
    d.unit = g.unit;
    d.node = model.dg[static_cast<size_t>(g.unit)].node;
    d.phase = phase_letter(g.phase);
    d.p_kw = g.p * sb;
    d.q_kvar = g.q * sb;
    rep.dg.push_back(std::move(d));
  }
  rep.elastic_kw = s.elastic * sb;
  const int T = static_cast<int>(s.v.size());
  rep.volt_min_pu.resize(T);
  rep.volt_max_pu.resize(T);
  for (int t = 0; t < T; ++t) {
    const auto mags = s.v[static_cast<size_t>(t)].cwiseAbs();
    rep.volt_min_pu(t) = mags.size() > 0 ? mags.minCoeff() : 0.0;
    rep.volt_max_pu(t) = mags.size() > 0 ? mags.maxCoeff() : 0.0;
  }
}

void write_outputs(const CliOptions& opt, const RunReport& rep, const StoredSolution* sol) {
  if (opt.out_dir.empty()) return;
  write_report_files(rep, opt.out_dir);
  if (sol) write_solution_file(opt.out_dir + "/solution.json", *sol);
}

std::string summary_line(const RunReport& rep) {
  std::string line = cat(rep.mode, ": ", rep.status, ", exit ", rep.exit_code);
  if (rep.status == "optimal" || rep.status == "valid" || rep.status == "flagged")
    line += cat(", objective ", rep.objective, rep.tight ? ", tight" : ", not tight");
  if (rep.solver_iterations > 0) line += cat(", ", rep.solver_iterations, " iterations");
  return line;
}

}  // namespace

std::map<std::string, double> solution_residuals(const SystemMatrices& m, const FeederModel& model,
                                                 const HorizonScenario& scenario,
                                                 const StoredSolution& s) {
  const IndexMap& ix = m.index;
  const int T = scenario.T;
  const int n = ix.n;
  const int n0 = feed_rows(ix);
  const int E = static_cast<int>(model.elastic.size());

  if (static_cast<int>(s.v.size()) != T)
    throw InputError(cat("solution covers ", s.v.size(), " slots, scenario has ", T));
  for (const CVec& v : s.v)
    if (v.size() != n)
      throw InputError(cat("solution voltage vector has ", v.size(), " rows, layout has ", n));
  if (s.rank_ratio.size() != T) throw InputError("solution rank series does not match the horizon");
  if (s.elastic.rows() != E || (E > 0 && s.elastic.cols() != T))
    throw InputError("stored deferrable schedule does not match the model");
  if (s.p0.rows() != n0 || s.p0.cols() != T || s.q0.rows() != n0 || s.q0.cols() != T)
    throw InputError("stored feed schedule does not match the feeder layout");
  size_t dg_rows = 0;
  for (const DgUnit& u : model.dg) dg_rows += static_cast<size_t>(u.phases.count());
  if (s.dg.size() != dg_rows)
    throw InputError(cat("solution carries ", s.dg.size(), " generator series, model has ",
                         dg_rows));
  for (const StoredSolution::Dg& g : s.dg) {
    if (g.unit < 0 || g.unit >= static_cast<int>(model.dg.size()))
      throw InputError("stored generator index out of range");
    if (!model.dg[static_cast<size_t>(g.unit)].phases.has(g.phase))
      throw InputError(cat("stored generator ", g.unit, " uses unlisted phase ",
                           phase_letter(g.phase)));
    if (g.p.size() != T || g.q.size() != T)
      throw InputError("stored generator series does not match the horizon");
  }

  // row -> generator unit over the listed phases, mirroring the program rows
  std::vector<int> dg_of_row(static_cast<size_t>(n), -1);
  for (size_t u = 0; u < model.dg.size(); ++u) {
    const int nd = model.node_index(model.dg[u].node);
    for (int ph : model.dg[u].phases.list())
      dg_of_row[static_cast<size_t>(ix(nd, ph))] = static_cast<int>(u);
  }

  // deferred power landing on each global row, per slot
  RMat row_elastic = RMat::Zero(n, T);
  for (int e = 0; e < E; ++e) {
    const ElasticLoad& el = model.elastic[static_cast<size_t>(e)];
    row_elastic.row(ix(model.node_index(el.node), el.phase)) += s.elastic.row(e);
  }

  std::map<std::string, double> res;
  for (const char* k : {"balance_p", "balance_q", "dg_balance", "dg_box", "vband",
                        "elastic_energy", "elastic_cap", "pcc_anchor", "feed_power",
                        "zbus_voltage", "objective"})
    res[k] = 0.0;
  auto bump = [&res](const char* k, double v) { res[k] = std::max(res[k], v); };

  double objective = 0.0;
  for (int t = 0; t < T; ++t) {
    const CVec& v = s.v[static_cast<size_t>(t)];
    const SlotPowers pw = recover_powers(v, m, model);

    for (int r = 0; r < n0; ++r) {
      const int ph = ix.owner[static_cast<size_t>(r)].second;
      bump("pcc_anchor", std::abs(v(r) - scenario.pcc_voltage(ph, t)));
      bump("feed_power", std::abs(s.p0(r, t) - pw.p0(r)));
      bump("feed_power", std::abs(s.q0(r, t) - pw.q0(r)));
    }

    for (int r = n0; r < n; ++r) {
      const auto [nd, ph] = ix.owner[static_cast<size_t>(r)];
      const NodeSpec& ns = model.nodes[static_cast<size_t>(nd)];
      const double vmag = std::abs(v(r));
      bump("vband", std::max({ns.vmin - vmag, vmag - ns.vmax, 0.0}));
      if (dg_of_row[static_cast<size_t>(r)] < 0) {
        const double p_l = scenario.p_load(ns.id, ph, t);
        const double q_l = scenario.q_load(ns.id, ph, t);
        const double y_c = ns.cap_susceptance[static_cast<size_t>(ph)];
        bump("balance_p", std::abs(pw.net_p(r) + p_l + row_elastic(r, t)));
        bump("balance_q", std::abs(pw.net_q(r) - y_c * vmag * vmag + q_l));
      }
    }

    for (const StoredSolution::Dg& g : s.dg) {
      const DgUnit& u = model.dg[static_cast<size_t>(g.unit)];
      const int r = ix(model.node_index(u.node), g.phase);
      const double p_l = scenario.p_load(u.node, g.phase, t);
      const double q_l = scenario.q_load(u.node, g.phase, t);
      bump("dg_balance", std::abs(g.p(t) - (pw.net_p(r) + p_l + row_elastic(r, t))));
      bump("dg_balance", std::abs(g.q(t) - (pw.net_q(r) + q_l)));
      bump("dg_box", std::max({u.pmin - g.p(t), g.p(t) - u.pmax, 0.0}));
      bump("dg_box", std::max({u.qmin - g.q(t), g.q(t) - u.qmax, 0.0}));
    }

    // net injections priced exactly as the dispatch objective does
    double cost = scenario.kappa[t] * pw.net_p.head(n0).sum();
    for (size_t u = 0; u < model.dg.size(); ++u) {
      const int nd = model.node_index(model.dg[u].node);
      for (int ph : model.dg[u].phases.list())
        cost += scenario.dg_cost(static_cast<Eigen::Index>(u), t) * pw.net_p(ix(nd, ph));
    }
    objective += cost;

    if (n > n0) {
      try {
        CVec s_rest(n - n0);
        for (int r = n0; r < n; ++r) s_rest(r - n0) = Complex(pw.net_p(r), pw.net_q(r));
        const CVec vz = zbus_fixed_point(m.Y, n0, v.head(n0), s_rest);
        bump("zbus_voltage", (vz - v).cwiseAbs().maxCoeff());
      } catch (const NumericalError&) {
        bump("zbus_voltage", std::numeric_limits<double>::infinity());
      }
    }
  }

  for (int e = 0; e < E; ++e) {
    const ElasticLoad& el = model.elastic[static_cast<size_t>(e)];
    double delivered = 0.0;
    for (int t = 0; t < T; ++t) {
      const double pe = s.elastic(e, t);
      if (t + 1 < el.t_start || t + 1 > el.t_end) {
        bump("elastic_cap", std::abs(pe));
        continue;
      }
      bump("elastic_cap", std::max(-pe, 0.0));
      if (std::isfinite(el.cap)) bump("elastic_cap", std::max(pe - el.cap, 0.0));
      delivered += scenario.dt_hours * pe;
    }
    bump("elastic_energy", std::abs(delivered - el.energy));
  }

  res["objective"] = std::abs(objective - s.objective) / (1.0 + std::abs(s.objective));
  return res;
}

RunReport cmd_dispatch(const CliOptions& opt) {
  RunReport rep = base_report(opt, "dispatch");
  Inputs in = ingest(opt);
  rep.w_v = in.scenario.w_v;
  say(opt, 1, cat("dispatch: ", in.m.index.n, " rows x ", in.scenario.T, " slots"));

  HermitianProgram hp = assemble_dispatch(in.m, in.model, in.scenario, effective_flags(opt));
  ConicProgram cp = real_embedding(hp);
  say(opt, 2, cat("program: ", cp.rows.size(), " rows, ", cp.blocks.size(), " blocks, ",
                  cp.scalars.size(), " scalars"));
  const SolverResult sol = solve(cp, solver_config(opt));
  rep.solver_iterations = sol.iterations;
  rep.status = status_string(sol.status);

  if (sol.status != SolveStatus::Optimal) {
    rep.exit_code = solve_exit(sol.status);
    rep.messages.push_back("solver finished: " + rep.status);
    write_outputs(opt, rep, nullptr);
    return rep;
  }

  const DispatchSolution d = recover_dispatch(sol, hp, in.m, in.model, in.scenario,
                                              recovery_config(opt));
  rep.objective = sol.objective;
  const StoredSolution stored = to_stored(d);
  fill_schedule(rep, stored, in.m, in.model);
  rep.residuals = solution_residuals(in.m, in.model, in.scenario, stored);
  rep.residuals["objective_recompute"] =
      std::abs(d.objective - sol.objective) / (1.0 + std::abs(sol.objective));
  rep.exit_code = d.tight ? 0 : 2;
  if (!d.tight) {
    int loose = 0;
    for (int t = 0; t < d.rank_ratio.size(); ++t)
      if (d.rank_ratio(t) > opt.rank_threshold) ++loose;
    rep.messages.push_back(cat("rank test failed on ", loose,
                               " slot(s); the schedule is a rank-one approximation"));
  }
  write_outputs(opt, rep, &stored);
  return rep;
}

RunReport cmd_feasibility(const CliOptions& opt) {
  RunReport rep = base_report(opt, "feasibility");
  Inputs in = ingest(opt);
  if (opt.wv_override) in.scenario.w_v = *opt.wv_override;
  rep.w_v = in.scenario.w_v;
  say(opt, 1, cat("feasibility: ", in.m.index.n, " rows x ", in.scenario.T,
                  " slots, voltage weight ", in.scenario.w_v));

  HermitianProgram hp = assemble_feasibility(in.m, in.model, in.scenario, effective_flags(opt));
  const SolverResult sol = solve(real_embedding(hp), solver_config(opt));
  rep.solver_iterations = sol.iterations;
  rep.status = status_string(sol.status);

  if (sol.status != SolveStatus::Optimal) {
    rep.exit_code = solve_exit(sol.status);
    rep.messages.push_back("solver finished: " + rep.status);
    write_outputs(opt, rep, nullptr);
    return rep;
  }

  const DispatchSolution d = recover_dispatch(sol, hp, in.m, in.model, in.scenario,
                                              recovery_config(opt));
  rep.objective = sol.objective;
  const StoredSolution stored = to_stored(d);
  fill_schedule(rep, stored, in.m, in.model);
  rep.residuals = solution_residuals(in.m, in.model, in.scenario, stored);

  const int n0 = feed_rows(in.m.index);
  for (int t = 0; t < in.scenario.T; ++t) {
    const CVec& v = stored.v[static_cast<size_t>(t)];
    for (int r = n0; r < in.m.index.n; ++r) {
      const auto [nd, ph] = in.m.index.owner[static_cast<size_t>(r)];
      const NodeSpec& ns = in.model.nodes[static_cast<size_t>(nd)];
      const double vmag = std::abs(v(r));
      if (vmag < ns.vmin - 1e-9 || vmag > ns.vmax + 1e-9)
        rep.flags.push_back({ns.id, phase_letter(ph), t + 1, vmag});
    }
  }
  rep.recommend_dispatch = rep.flags.empty();
  rep.status = rep.flags.empty() ? "optimal" : "flagged";
  rep.exit_code = (rep.flags.empty() && d.tight) ? 0 : 2;
  rep.messages.push_back(rep.flags.empty()
                             ? "no voltage excursions; the band is attainable"
                             : cat(rep.flags.size(), " voltage excursion(s) flagged"));
  write_outputs(opt, rep, &stored);
  return rep;
}

RunReport cmd_capsweep(const CliOptions& opt) {
  RunReport rep = base_report(opt, "capsweep");
  Inputs in = ingest(opt);
  rep.w_v = in.scenario.w_v;

  std::vector<int> switched;  // node indices carrying switch levels, file order
  for (size_t i = 0; i < in.model.nodes.size(); ++i)
    if (!in.model.nodes[i].cap_switch_levels.empty()) {
      switched.push_back(static_cast<int>(i));
      rep.switched_nodes.push_back(in.model.nodes[i].id);
    }
  if (switched.empty()) throw InputError("no node carries capacitor switch levels to sweep");

  // Cartesian product of the level choices, lexicographic in node order.
  std::vector<std::vector<int>> combos{{}};
  for (int nd : switched) {
    const size_t levels = in.model.nodes[static_cast<size_t>(nd)].cap_switch_levels.size();
    std::vector<std::vector<int>> next;
    next.reserve(combos.size() * levels);
    for (const std::vector<int>& c : combos)
      for (size_t l = 0; l < levels; ++l) {
        next.push_back(c);
        next.back().push_back(static_cast<int>(l));
      }
    combos.swap(next);
  }
  say(opt, 1, cat("capsweep: ", combos.size(), " configurations over ", switched.size(),
                  " switched node(s)"));

  auto apply_levels = [&](const std::vector<int>& combo) {
    FeederModel cfg = in.model;
    for (size_t k = 0; k < switched.size(); ++k) {
      NodeSpec& ns = cfg.nodes[static_cast<size_t>(switched[k])];
      const double level = ns.cap_switch_levels[static_cast<size_t>(combo[k])];
      for (int ph : ns.phases.list()) ns.cap_susceptance[static_cast<size_t>(ph)] = level;
    }
    return cfg;
  };

  struct ConfigOut {
    std::string status;
    double objective = 0.0;
    bool tight = false;
    bool ok = false;
    int iterations = 0;
    StoredSolution stored;
    std::string error;
  };
  const ConstraintFlags flags = effective_flags(opt);
  SolverConfig scfg = solver_config(opt);
  scfg.verbose = false;  // concurrent solves must not interleave iteration logs

  auto run_one = [&](const std::vector<int>& combo) {
    ConfigOut out;
    const FeederModel cfg = apply_levels(combo);
    HermitianProgram hp = assemble_dispatch(in.m, cfg, in.scenario, flags);
    const SolverResult sol = solve(real_embedding(hp), scfg);
    out.status = status_string(sol.status);
    out.iterations = sol.iterations;
    if (sol.status != SolveStatus::Optimal) return out;
    out.objective = sol.objective;
    try {
      const DispatchSolution d = recover_dispatch(
          sol, hp, in.m, cfg, in.scenario, recovery_config(opt));
      out.tight = d.tight;
      out.stored = to_stored(d);
      out.ok = true;
    } catch (const NumericalError& e) {
      out.status = "numerical_failure";
      out.error = e.what();
    }
    return out;
  };

  // One dispatch solve per configuration, a hardware batch at a time. The
  // system matrices are shared read-only: the capacitor level enters the
  // balance rows, never the admittance.
  std::vector<ConfigOut> outs(combos.size());
  const size_t batch = std::max(1u, std::thread::hardware_concurrency());
  for (size_t start = 0; start < combos.size(); start += batch) {
    const size_t stop = std::min(combos.size(), start + batch);
    std::vector<std::future<ConfigOut>> futs;
    for (size_t i = start; i < stop; ++i)
      futs.push_back(std::async(std::launch::async, run_one, std::cref(combos[i])));
    for (size_t i = start; i < stop; ++i) outs[i] = futs[i - start].get();
  }

  int best = -1;
  bool all_infeasible = true;
  for (size_t i = 0; i < outs.size(); ++i) {
    const ConfigOut& o = outs[i];
    RunReport::ConfigResult cr;
    cr.level_index = combos[i];
    for (size_t k = 0; k < switched.size(); ++k)
      cr.level_value.push_back(in.model.nodes[static_cast<size_t>(switched[k])]
                                   .cap_switch_levels[static_cast<size_t>(combos[i][k])]);
    cr.status = o.status;
    cr.objective = o.objective;
    cr.tight = o.tight;
    rep.configs.push_back(std::move(cr));
    if (o.status != "infeasible") all_infeasible = false;
    if (o.ok && (best < 0 || o.objective < outs[static_cast<size_t>(best)].objective))
      best = static_cast<int>(i);
    say(opt, 2, cat("config ", i, ": ", o.status,
                    o.ok ? cat(", objective ", o.objective) : std::string(),
                    o.error.empty() ? std::string() : ", " + o.error));
  }

  if (best < 0) {
    rep.status = all_infeasible ? "infeasible" : "numerical_failure";
    rep.exit_code = all_infeasible ? 3 : 5;
    rep.messages.push_back("no switch configuration produced a dispatch");
    write_outputs(opt, rep, nullptr);
    return rep;
  }

  const ConfigOut& win = outs[static_cast<size_t>(best)];
  rep.best_config = best;
  rep.status = "optimal";
  rep.objective = win.objective;
  rep.solver_iterations = win.iterations;
  const FeederModel win_model = apply_levels(combos[static_cast<size_t>(best)]);
  fill_schedule(rep, win.stored, in.m, win_model);
  rep.residuals = solution_residuals(in.m, win_model, in.scenario, win.stored);
  rep.exit_code = win.tight ? 0 : 2;
  say(opt, 1, cat("capsweep: best configuration ", best, ", objective ", win.objective));
  write_outputs(opt, rep, &win.stored);
  return rep;
}

RunReport cmd_validate(const CliOptions& opt) {
  RunReport rep = base_report(opt, "validate");
  Inputs in = ingest(opt);
  rep.w_v = in.scenario.w_v;
  const StoredSolution s = load_solution(opt.solution_path);
  rep.objective = s.objective;
  fill_schedule(rep, s, in.m, in.model);
  rep.residuals = solution_residuals(in.m, in.model, in.scenario, s);

  for (const auto& [family, value] : rep.residuals)
    if (!(value <= opt.validate_tol))
      rep.messages.push_back(cat("residual ", family, " = ", value, " exceeds ",
                                 opt.validate_tol));
  const bool clean = rep.messages.empty();
  rep.status = clean ? "valid" : "flagged";
  rep.exit_code = clean ? 0 : 2;
  write_outputs(opt, rep, nullptr);
  return rep;
}

RunReport run_cli(const CliOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  try {
    if (opt.mode == "dispatch") {
      rep = cmd_dispatch(opt);
    } else if (opt.mode == "feasibility") {
      rep = cmd_feasibility(opt);
    } else if (opt.mode == "capsweep") {
      rep = cmd_capsweep(opt);
    } else if (opt.mode == "validate") {
      rep = cmd_validate(opt);
    } else {
      throw InputError("unknown mode '" + opt.mode + "'");
    }
  } catch (const InputError& e) {
    rep = base_report(opt, opt.mode);
    rep.status = "input_error";
    rep.exit_code = 4;
    rep.messages.push_back(e.what());
    try {
      write_outputs(opt, rep, nullptr);
    } catch (...) {
    }
  } catch (const std::exception& e) {
    rep = base_report(opt, opt.mode);
    rep.status = "numerical_failure";
    rep.exit_code = 5;
    rep.messages.push_back(e.what());
    try {
      write_outputs(opt, rep, nullptr);
    } catch (...) {
    }
  }
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  say(opt, 1, summary_line(rep) + cat(", ", rep.wall_ms, " ms"));
  return rep;
}

}  // namespace sdopf
