#include "sdopf/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace sdopf {
namespace {

using ordered = nlohmann::ordered_json;

ordered vec_json(const RVec& v) {
  ordered a = ordered::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

ordered mat_json(const RMat& m) {
  ordered rows = ordered::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace

std::string report_json(const RunReport& r) {
  ordered root;
  root["mode"] = r.mode;
  root["status"] = r.status;
  root["exit_code"] = r.exit_code;
  root["tight"] = r.tight;
  root["objective"] = r.objective;
  root["solver_iterations"] = r.solver_iterations;

  ordered cfg;
  cfg["feeder"] = r.feeder_path;
  cfg["scenario"] = r.scenario_path;
  cfg["tol"] = r.tol;
  cfg["rank_threshold"] = r.rank_threshold;
  cfg["w_v"] = r.w_v;
  cfg["seed"] = r.seed;
  cfg["enabled"] = r.enabled;
  root["config"] = std::move(cfg);

  if (!r.messages.empty()) root["messages"] = r.messages;

  const Eigen::Index T = r.rank_ratio.size();
  if (T > 0) {
    ordered slots = ordered::array();
    for (Eigen::Index t = 0; t < T; ++t) {
      ordered s;
      s["slot"] = static_cast<int>(t) + 1;
      s["rank_ratio"] = r.rank_ratio[t];
      if (r.volt_min_pu.size() == T) s["vmin_pu"] = r.volt_min_pu[t];
      if (r.volt_max_pu.size() == T) s["vmax_pu"] = r.volt_max_pu[t];
      ordered pcc = ordered::array();
      for (Eigen::Index i = 0; i < r.p0_kw.rows(); ++i) {
        ordered ph;
        ph["phase"] = std::string(1, r.pcc_phase[static_cast<size_t>(i)]);
        ph["p_kw"] = r.p0_kw(i, t);
        ph["q_kvar"] = r.q0_kvar(i, t);
        ph["pf"] = r.pf0(i, t);
        pcc.push_back(std::move(ph));
      }
      s["pcc"] = std::move(pcc);
      slots.push_back(std::move(s));
    }
    root["slots"] = std::move(slots);
  }

  if (!r.dg.empty()) {
    ordered dg = ordered::array();
    for (const auto& g : r.dg) {
      ordered e;
      e["unit"] = g.unit;
      e["node"] = g.node;
      e["phase"] = std::string(1, g.phase);
      e["p_kw"] = vec_json(g.p_kw);
      e["q_kvar"] = vec_json(g.q_kvar);
      dg.push_back(std::move(e));
    }
    root["dg"] = std::move(dg);
  }
  if (r.elastic_kw.rows() > 0) root["elastic_kw"] = mat_json(r.elastic_kw);
  if (!r.residuals.empty()) {
    ordered res;
    for (const auto& [family, value] : r.residuals) res[family] = value;
    root["residuals"] = std::move(res);
  }

  if (r.mode == "feasibility") {
    ordered flags = ordered::array();
    for (const auto& f : r.flags) {
      ordered e;
      e["node"] = f.node;
      e["phase"] = std::string(1, f.phase);
      e["slot"] = f.slot;
      e["vmag_pu"] = f.vmag;
      flags.push_back(std::move(e));
    }
    root["flags"] = std::move(flags);
    root["recommend_dispatch"] = r.recommend_dispatch;
  }

  if (r.mode == "capsweep") {
    root["switched_nodes"] = r.switched_nodes;
    ordered configs = ordered::array();
    for (const auto& c : r.configs) {
      ordered e;
      e["levels"] = c.level_index;
      e["susceptance_pu"] = c.level_value;
      e["status"] = c.status;
      e["objective"] = c.objective;
      e["tight"] = c.tight;
      configs.push_back(std::move(e));
    }
    root["configs"] = std::move(configs);
    root["best_config"] = r.best_config;
  }
  return root.dump(1) + "\n";
}

std::string report_csv(const RunReport& r) {
  std::string out = "slot,phase,p_pcc_kw,q_pcc_kvar,pf_pcc";
  for (const auto& g : r.dg) {
    std::string col = "dg" + std::to_string(g.unit) + "_" + std::string(1, g.phase);
    out += "," + col + "_p_kw," + col + "_q_kvar";
  }
  out += ",rank_ratio,vmin_pu,vmax_pu\n";

  const Eigen::Index T = r.rank_ratio.size();
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index i = 0; i < r.p0_kw.rows(); ++i) {
      out += std::to_string(t + 1);
      out += ",";
      out += r.pcc_phase[static_cast<size_t>(i)];
      out += "," + fmt(r.p0_kw(i, t)) + "," + fmt(r.q0_kvar(i, t)) + "," + fmt(r.pf0(i, t));
      for (const auto& g : r.dg) out += "," + fmt(g.p_kw[t]) + "," + fmt(g.q_kvar[t]);
      out += "," + fmt(r.rank_ratio[t]);
      out += "," + (r.volt_min_pu.size() == T ? fmt(r.volt_min_pu[t]) : std::string());
      out += "," + (r.volt_max_pu.size() == T ? fmt(r.volt_max_pu[t]) : std::string()) + "\n";
    }
  }
  return out;
}

void write_report_files(const RunReport& r, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir), ec);
  if (ec) throw InputError("cannot create output directory " + out_dir + ": " + ec.message());
  for (const auto& [name, text] :
       {std::pair<const char*, std::string>{"report.json", report_json(r)},
        {"report.csv", report_csv(r)}}) {
    fs::path p = fs::path(out_dir) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    out << text;
  }
}

}  // namespace sdopf
