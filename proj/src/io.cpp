#include "sdopf/io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sdopf/kron.hpp"

namespace sdopf {
namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw InputError(where + ": " + what);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(where, e.what());
  }
}

const json& field(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

double num(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

double num_field(const json& j, const char* key, const std::string& where) {
  return num(field(j, key, where), where + "." + key);
}

double num_or(const json& j, const char* key, double def, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return def;
  return num(*it, where + "." + key);
}

int int_field(const json& j, const char* key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_number_integer()) fail(where + "." + key, "expected an integer");
  return v.get<int>();
}

std::string str_field(const json& j, const char* key, const std::string& where) {
  const json& v = field(j, key, where);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  fail(where + "." + key, "expected a string");
}

PhaseSet phases_field(const json& j, const char* key, const std::string& where) {
  std::string s = str_field(j, key, where);
  try {
    PhaseSet p = PhaseSet::parse(s);
    if (p.empty()) fail(where + "." + key, "empty phase set");
    return p;
  } catch (const InputError& e) {
    fail(where + "." + key, e.what());
  }
}

Complex cnum(const json& j, const std::string& where) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    fail(where, "expected [re, im] or a bare number");
  return Complex(j[0].get<double>(), j[1].get<double>());
}

CMat cmat(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a non-empty matrix");
  int rows = static_cast<int>(j.size());
  int cols = -1;
  CMat m;
  for (int r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array()) fail(where, "row " + std::to_string(r) + " is not an array");
    if (cols < 0) {
      cols = static_cast<int>(row.size());
      m.setZero(rows, cols);
    }
    if (static_cast<int>(row.size()) != cols) fail(where, "ragged rows");
    for (int c = 0; c < cols; ++c)
      m(r, c) = cnum(row[static_cast<size_t>(c)],
                     where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  }
  return m;
}

RVec rvec(const json& j, int len, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array");
  if (len >= 0 && static_cast<int>(j.size()) != len)
    fail(where, "expected length " + std::to_string(len) + ", got " + std::to_string(j.size()));
  RVec v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = num(j[i], where);
  return v;
}

int parse_phase(const json& j, const std::string& where) {
  if (j.is_number_integer()) {
    int p = j.get<int>();
    if (p < 0 || p > 2) fail(where, "phase index out of range");
    return p;
  }
  std::string s = j.is_string() ? j.get<std::string>() : "";
  if (s == "a" || s == "A") return 0;
  if (s == "b" || s == "B") return 1;
  if (s == "c" || s == "C") return 2;
  fail(where, "expected a phase (a/b/c or 0..2)");
}

void parse_capacitor(const json& j, NodeSpec& node, const std::string& where) {
  auto sus = j.find("susceptance_per_phase");
  if (sus != j.end()) {
    if (sus->is_number()) {
      double b = sus->get<double>();
      for (int p : node.phases.list()) node.cap_susceptance[static_cast<size_t>(p)] = b;
    } else if (sus->is_array() && sus->size() == 3) {
      for (size_t p = 0; p < 3; ++p)
        node.cap_susceptance[p] = num((*sus)[p], where + ".susceptance_per_phase");
    } else {
      fail(where + ".susceptance_per_phase", "expected a number or a 3-array");
    }
  }
  auto lev = j.find("switch_levels");
  if (lev != j.end()) {
    if (!lev->is_array() || lev->empty()) fail(where + ".switch_levels", "expected a non-empty array");
    for (const auto& l : *lev) node.cap_switch_levels.push_back(num(l, where + ".switch_levels"));
  }
  if (sus == j.end() && lev == j.end())
    fail(where, "capacitor needs susceptance_per_phase or switch_levels");
}

double cap_or_none(const json& j, const char* key, double scale, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return kNoCap;
  return num(*it, where + "." + key) * scale;
}

}  // namespace

FeederModel parse_feeder(const std::string& json_text) {
  json root = parse_json(json_text, "feeder");
  FeederModel model;

  if (auto it = root.find("bases"); it != root.end()) {
    model.base_kva = num_or(*it, "kva", model.base_kva, "feeder.bases");
    model.base_kv = num_or(*it, "kv", model.base_kv, "feeder.bases");
    if (model.base_kva <= 0 || model.base_kv <= 0) fail("feeder.bases", "bases must be positive");
  }
  const double z_base = model.z_base_ohm();
  const double s_base = model.s_base_kva_per_phase();

  const json& nodes = field(root, "nodes", "feeder");
  if (!nodes.is_array() || nodes.empty()) fail("feeder.nodes", "expected a non-empty array");
  for (size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = "feeder.nodes[" + std::to_string(i) + "]";
    const json& jn = nodes[i];
    NodeSpec n;
    n.id = str_field(jn, "id", where);
    n.phases = phases_field(jn, "phases", where);
    n.vmin = num_or(jn, "vmin", n.vmin, where);
    n.vmax = num_or(jn, "vmax", n.vmax, where);
    n.min_pf = num_or(jn, "min_pf", 0.0, where);
    if (auto c = jn.find("capacitor"); c != jn.end()) parse_capacitor(*c, n, where + ".capacitor");
    if (model.node_index(n.id) >= 0) fail(where, "duplicate node id '" + n.id + "'");
    model.nodes.push_back(std::move(n));
  }

  if (auto jl = root.find("lines"); jl != root.end()) {
    if (!jl->is_array()) fail("feeder.lines", "expected an array");
    for (size_t i = 0; i < jl->size(); ++i) {
      const std::string where = "feeder.lines[" + std::to_string(i) + "]";
      const json& j = (*jl)[i];
      LineSegment ln;
      ln.from = str_field(j, "from", where);
      ln.to = str_field(j, "to", where);
      if (model.node_index(ln.from) < 0) fail(where, "unknown node '" + ln.from + "'");
      if (model.node_index(ln.to) < 0) fail(where, "unknown node '" + ln.to + "'");
      ln.phases = phases_field(j, "phases", where);
      const int np = ln.phases.count();

      bool has_prim = j.contains("primitive_z"), has_phase = j.contains("z_phase");
      if (has_prim == has_phase) fail(where, "need exactly one of primitive_z / z_phase");
      if (has_prim) {
        CMat prim = cmat(j["primitive_z"], where + ".primitive_z");
        if (prim.rows() != prim.cols() || prim.rows() < np)
          fail(where + ".primitive_z", "expected a square matrix covering the phase set");
        int wires = static_cast<int>(prim.rows()) - np;
        if (auto it = j.find("neutrals"); it != j.end()) {
          if (!it->is_number_integer() || it->get<int>() != wires)
            fail(where + ".neutrals", "inconsistent with primitive_z size");
        }
        KronResult k = kron_reduce(prim / z_base, np);
        ln.z_phase = std::move(k.z_phase);
        ln.t_neutral = std::move(k.t_neutral);
      } else {
        ln.z_phase = cmat(j["z_phase"], where + ".z_phase");
        if (ln.z_phase.rows() != np || ln.z_phase.cols() != np)
          fail(where + ".z_phase", "expected a " + std::to_string(np) + "-square per-unit matrix");
      }
      if (auto it = j.find("y_shunt"); it != j.end()) {
        ln.y_shunt = cmat(*it, where + ".y_shunt");
        if (ln.y_shunt.rows() != np || ln.y_shunt.cols() != np)
          fail(where + ".y_shunt", "expected a " + std::to_string(np) + "-square per-unit matrix");
      }
      ln.i_max = cap_or_none(j, "i_max", 1.0, where);
      ln.p_loss_max = cap_or_none(j, "p_loss_max", 1.0, where);
      ln.i_neutral_max = cap_or_none(j, "i_neutral_max", 1.0, where);
      model.lines.push_back(std::move(ln));
    }
  }

  if (auto jd = root.find("dg"); jd != root.end()) {
    if (!jd->is_array()) fail("feeder.dg", "expected an array");
    for (size_t i = 0; i < jd->size(); ++i) {
      const std::string where = "feeder.dg[" + std::to_string(i) + "]";
      const json& j = (*jd)[i];
      DgUnit u;
      u.node = str_field(j, "node", where);
      if (model.node_index(u.node) < 0) fail(where, "unknown node '" + u.node + "'");
      u.phases = phases_field(j, "phases", where);
      u.pmin = num_or(j, "pmin", 0.0, where);
      u.pmax = num_or(j, "pmax", 0.0, where);
      u.qmin = num_or(j, "qmin", 0.0, where);
      u.qmax = num_or(j, "qmax", 0.0, where);
      model.dg.push_back(std::move(u));
    }
  }

  if (auto je = root.find("elastic"); je != root.end()) {
    if (!je->is_array()) fail("feeder.elastic", "expected an array");
    for (size_t i = 0; i < je->size(); ++i) {
      const std::string where = "feeder.elastic[" + std::to_string(i) + "]";
      const json& j = (*je)[i];
      ElasticLoad e;
      e.node = str_field(j, "node", where);
      if (model.node_index(e.node) < 0) fail(where, "unknown node '" + e.node + "'");
      e.phase = parse_phase(field(j, "phase", where), where + ".phase");
      e.energy = num_field(j, "energy_kwh", where) / s_base;
      e.cap = cap_or_none(j, "cap_kw", 1.0 / s_base, where);
      const json& w = field(j, "window", where);
      if (!w.is_array() || w.size() != 2) fail(where + ".window", "expected [first, last]");
      e.t_start = w[0].is_number_integer() ? w[0].get<int>() : -1;
      e.t_end = w[1].is_number_integer() ? w[1].get<int>() : -1;
      if (e.t_start < 1 || e.t_end < e.t_start)
        fail(where + ".window", "expected 1 <= first <= last");
      model.elastic.push_back(std::move(e));
    }
  }
  return model;
}

FeederModel load_feeder(const std::string& path) {
  try {
    return parse_feeder(read_text(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

HorizonScenario parse_scenario(const std::string& json_text) {
  json root = parse_json(json_text, "scenario");
  HorizonScenario sc;

  sc.T = int_field(root, "T", "scenario");
  if (sc.T < 1) fail("scenario.T", "horizon must cover at least one slot");
  sc.dt_hours = num_or(root, "dt_hours", 1.0, "scenario");
  if (!(sc.dt_hours > 0)) fail("scenario.dt_hours", "slot length must be positive");

  sc.kappa = rvec(field(root, "kappa", "scenario"), sc.T, "scenario.kappa");

  if (auto it = root.find("dg_cost"); it != root.end()) {
    if (!it->is_array()) fail("scenario.dg_cost", "expected an array of per-unit rows");
    sc.dg_cost.resize(static_cast<Eigen::Index>(it->size()), sc.T);
    for (size_t u = 0; u < it->size(); ++u)
      sc.dg_cost.row(static_cast<Eigen::Index>(u)) =
          rvec((*it)[u], sc.T, "scenario.dg_cost[" + std::to_string(u) + "]").transpose();
  } else {
    sc.dg_cost.resize(0, sc.T);
  }

  if (auto it = root.find("loads"); it != root.end()) {
    if (!it->is_object()) fail("scenario.loads", "expected an object keyed by node id");
    for (auto& [node, per_phase] : it->items()) {
      const std::string where = "scenario.loads." + node;
      if (!per_phase.is_object()) fail(where, "expected an object keyed by phase");
      auto& p_arr = sc.load_p[node];
      auto& q_arr = sc.load_q[node];
      for (auto& [ph, series] : per_phase.items()) {
        int p = parse_phase(json(ph), where);
        if (auto jp = series.find("p"); jp != series.end())
          p_arr[static_cast<size_t>(p)] = rvec(*jp, sc.T, where + "." + ph + ".p");
        if (auto jq = series.find("q"); jq != series.end())
          q_arr[static_cast<size_t>(p)] = rvec(*jq, sc.T, where + "." + ph + ".q");
      }
    }
  }

  const json& pcc = field(root, "pcc", "scenario");
  std::array<double, 3> vmag{};
  const json& jv = field(pcc, "vmag", "scenario.pcc");
  if (jv.is_number()) {
    vmag.fill(jv.get<double>());
  } else {
    RVec v = rvec(jv, 3, "scenario.pcc.vmag");
    for (int p = 0; p < 3; ++p) vmag[static_cast<size_t>(p)] = v[p];
  }
  RVec ang = rvec(field(pcc, "angles_deg", "scenario.pcc"), 3, "scenario.pcc.angles_deg");
  sc.pcc_voltage.resize(3, sc.T);
  for (int p = 0; p < 3; ++p)
    sc.pcc_voltage.row(p).setConstant(std::polar(vmag[static_cast<size_t>(p)], deg2rad(ang[p])));

  sc.pcc_min_pf = num_or(root, "pcc_min_pf", 0.0, "scenario");
  sc.w_v = num_or(root, "w_v", 0.5, "scenario");
  sc.v_ref = num_or(root, "v_ref", 1.0, "scenario");
  return sc;
}

HorizonScenario load_scenario(const std::string& path) {
  try {
    return parse_scenario(read_text(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

StoredSolution to_stored(const DispatchSolution& d) {
  StoredSolution s;
  s.objective = d.objective;
  s.tight = d.tight;
  s.rank_ratio = d.rank_ratio;
  s.v = d.v;
  for (const auto& g : d.dg) s.dg.push_back({g.unit, g.phase, g.p, g.q});
  s.elastic = d.elastic;
  s.p0 = d.p0;
  s.q0 = d.q0;
  s.pf0 = d.pf0;
  return s;
}

namespace {

ordered cvec_json(const CVec& v) {
  ordered rows = ordered::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    rows.push_back(ordered::array({v[i].real(), v[i].imag()}));
  return rows;
}

ordered rvec_json(const RVec& v) {
  ordered row = ordered::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v[i]);
  return row;
}

ordered rmat_json(const RMat& m) {
  ordered rows = ordered::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered row = ordered::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

RMat json_rmat(const json& j, int rows, int cols, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) fail(where, "bad row count");
  RMat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    m.row(r) = rvec(j[static_cast<size_t>(r)], cols, where).transpose();
  return m;
}

}  // namespace

std::string solution_to_json(const StoredSolution& s) {
  ordered root;
  root["format"] = "dispatch-solution-1";
  root["objective"] = s.objective;
  root["tight"] = s.tight;
  root["rank_ratio"] = rvec_json(s.rank_ratio);
  ordered volts = ordered::array();
  for (const CVec& v : s.v) volts.push_back(cvec_json(v));
  root["voltages"] = std::move(volts);
  ordered dg = ordered::array();
  for (const auto& g : s.dg) {
    ordered e;
    e["unit"] = g.unit;
    e["phase"] = g.phase;
    e["p"] = rvec_json(g.p);
    e["q"] = rvec_json(g.q);
    dg.push_back(std::move(e));
  }
  root["dg"] = std::move(dg);
  root["elastic"] = rmat_json(s.elastic);
  root["p0"] = rmat_json(s.p0);
  root["q0"] = rmat_json(s.q0);
  root["pf0"] = rmat_json(s.pf0);
  return root.dump(1) + "\n";
}

void write_solution_file(const std::string& path, const StoredSolution& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << solution_to_json(s);
}

StoredSolution load_solution(const std::string& path) {
  json root = parse_json(read_text(path), path);
  const std::string where = path;
  StoredSolution s;
  s.objective = num_field(root, "objective", where);
  const json& jt = field(root, "tight", where);
  if (!jt.is_boolean()) fail(where + ".tight", "expected a boolean");
  s.tight = jt.get<bool>();
  s.rank_ratio = rvec(field(root, "rank_ratio", where), -1, where + ".rank_ratio");
  const int T = static_cast<int>(s.rank_ratio.size());
  if (T < 1) fail(where + ".rank_ratio", "empty horizon");

  const json& jv = field(root, "voltages", where);
  if (!jv.is_array() || static_cast<int>(jv.size()) != T)
    fail(where + ".voltages", "expected one entry per slot");
  int n = -1;
  for (int t = 0; t < T; ++t) {
    const json& slot = jv[static_cast<size_t>(t)];
    if (!slot.is_array()) fail(where + ".voltages", "slot " + std::to_string(t) + " not an array");
    if (n < 0) n = static_cast<int>(slot.size());
    if (static_cast<int>(slot.size()) != n) fail(where + ".voltages", "ragged slots");
    CVec v(n);
    for (int r = 0; r < n; ++r)
      v[r] = cnum(slot[static_cast<size_t>(r)], where + ".voltages entry");
    s.v.push_back(std::move(v));
  }

  if (auto it = root.find("dg"); it != root.end()) {
    for (size_t i = 0; i < it->size(); ++i) {
      const json& j = (*it)[i];
      const std::string dw = where + ".dg[" + std::to_string(i) + "]";
      StoredSolution::Dg g;
      g.unit = int_field(j, "unit", dw);
      g.phase = int_field(j, "phase", dw);
      g.p = rvec(field(j, "p", dw), T, dw + ".p");
      g.q = rvec(field(j, "q", dw), T, dw + ".q");
      s.dg.push_back(std::move(g));
    }
  }

  const json& je = field(root, "elastic", where);
  s.elastic = je.empty() ? RMat(0, T)
                         : json_rmat(je, static_cast<int>(je.size()), T, where + ".elastic");
  const json& jp = field(root, "p0", where);
  const int n0 = static_cast<int>(jp.size());
  s.p0 = json_rmat(jp, n0, T, where + ".p0");
  s.q0 = json_rmat(field(root, "q0", where), n0, T, where + ".q0");
  s.pf0 = json_rmat(field(root, "pf0", where), n0, T, where + ".pf0");
  return s;
}

}  // namespace sdopf
