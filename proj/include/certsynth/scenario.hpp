#pragma once

// Scenario files: one JSON document describing the system source, the
// variables and formula, and the certificate, synthesis, feedback and
// simulation options. See docs/scenario-format.md.

#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "certsynth/bisim.hpp"
#include "certsynth/error.hpp"
#include "certsynth/mcsim.hpp"
#include "certsynth/mtl.hpp"
#include "certsynth/powergrid.hpp"
#include "certsynth/sysmodel.hpp"

namespace certsynth {

using json = nlohmann::json;

struct AnticipatedScript {
  std::string channel;
  double t1 = 0.0, t2 = 0.0;
  Vector magnitudes;
};

struct SynthOptions {
  double dt = 0.01;
  double horizon = 5.0;
  double margin = 1e-6;
  Vector weights;
  Vector bounds;
  bool use_pool = true;
};

struct FeedbackOptions {
  std::size_t centers = 1;
  double rho = 0.1;
  std::uint64_t seed = 1;
  std::size_t delay = 1;
  std::vector<AnticipatedScript> anticipate;
};

struct Scenario {
  std::string name;
  std::string source;  // "fourbus", "ninebus" or "matrices"
  WtgParams wtg;
  GridParams grid;
  SwitchedLinearSystem sys;
  ModeSchedule schedule;
  Vector x0;
  std::vector<VariableDecl> vars;
  std::string formula_text, pool_text;
  Formula formula;  // the specification handed to synthesis first
  Formula pool;     // optional constraints added on demand
  Formula full;     // formula ∧ pool: what is certified and verified
  CertOptions cert;
  std::map<std::string, double> bands;  // per-variable band overrides
  SynthOptions synth;
  FeedbackOptions feedback;
  SimConfig sim;
  std::string controller = "feedforward";
  std::map<std::string, Vector> channels;  // disturbance drift directions
  std::string output;
  std::vector<std::string> warnings;

  Disturbance disturbance(const std::string& channel, double t1, double t2, double magnitude) const {
    const auto it = channels.find(channel);
    if (it == channels.end()) throw Error(Errc::Config, "unknown disturbance channel '" + channel + "'");
    if (!(t2 > t1)) throw Error(Errc::Config, "disturbance window must have t2 > t1");
    return {t1, t2, it->second, magnitude, channel};
  }
  const VariableDecl* variable(const std::string& n) const {
    for (const auto& v : vars)
      if (v.name == n) return &v;
    return nullptr;
  }
};

namespace detail {

inline void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw Error(Errc::Config, where + " must be an object");
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw Error(Errc::Config, "unknown key '" + k + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::Config, std::string("bad value for '") + key + "': " + e.what());
  }
}

inline Vector vec(const json& j, const std::string& what) {
  try {
    return j.get<Vector>();
  } catch (const json::exception&) {
    throw Error(Errc::Config, what + " must be a list of numbers");
  }
}

inline Matrix mat(const json& j, std::size_t rows, std::size_t cols, const std::string& what) {
  if (!j.is_array() || j.size() != rows) throw Error(Errc::Config, what + " must have " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const Vector r = vec(j[i], what);
    if (r.size() != cols) throw Error(Errc::Config, what + " row " + std::to_string(i) + " needs " + std::to_string(cols) + " entries");
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = r[k];
  }
  return m;
}

template <class P>
void override_fields(const json& j, const std::string& where, const std::map<std::string, double P::*>& fields, P& p) {
  if (!j.is_object()) throw Error(Errc::Config, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    const auto it = fields.find(k);
    if (it == fields.end()) throw Error(Errc::Config, "unknown key '" + k + "' in " + where);
    if (!v.is_number()) throw Error(Errc::Config, where + "." + k + " must be a number");
    p.*(it->second) = v.template get<double>();
  }
}

inline void read_wtg(const json& j, WtgParams& p) {
  using W = WtgParams;
  static const std::map<std::string, double W::*> f = {
      {"Rs", &W::Rs},     {"Rr", &W::Rr},       {"Xm", &W::Xm},     {"Xs", &W::Xs},         {"Xr", &W::Xr},
      {"Xt", &W::Xt},     {"HD", &W::HD},       {"ws", &W::ws},     {"KP1", &W::KP1},       {"KI1", &W::KI1},
      {"KP2", &W::KP2},   {"KI2", &W::KI2},     {"KP3", &W::KP3},   {"KI3", &W::KI3},       {"KP4", &W::KP4},
      {"KI4", &W::KI4},   {"Rt", &W::Rt},       {"rho", &W::rho},   {"k", &W::k},           {"poles", &W::poles},
      {"wb", &W::wb},     {"Sb", &W::Sb},       {"Copt", &W::Copt}, {"p_gen", &W::p_gen},   {"v_wind", &W::v_wind},
      {"q_set", &W::q_set}, {"v_grid", &W::v_grid}, {"th_grid", &W::th_grid}, {"kw", &W::kw}};
  override_fields(j, "system.wtg", f, p);
}

inline void read_grid(const json& j, GridParams& g) {
  using G = GridParams;
  json rest = j;
  if (rest.contains("wtg_count")) {
    g.wtg_count = get_or(rest, "wtg_count", g.wtg_count);
    rest.erase("wtg_count");
  }
  static const std::map<std::string, double G::*> f = {
      {"base_mva", &G::base_mva},   {"H", &G::H},           {"D", &G::D},
      {"tau_ch", &G::tau_ch},       {"tau_g", &G::tau_g},   {"R", &G::R},
      {"ws", &G::ws},               {"dPd", &G::dPd},       {"switch_on", &G::switch_on},
      {"switch_off", &G::switch_off}, {"storage_ramp", &G::storage_ramp}, {"wtg_mva", &G::wtg_mva},
      {"horizon", &G::horizon}};
  override_fields(rest, "system.grid", f, g);
  if (g.wtg_count < 0) throw Error(Errc::Config, "system.grid.wtg_count must be >= 0");
}

inline std::size_t name_or_index(const json& j, const std::vector<std::string>& names, const std::string& what) {
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == s) return i;
    throw Error(Errc::Config, what + " '" + s + "' is not a known name");
  }
  throw Error(Errc::Config, what + " must be a name or a non-negative index");
}

inline std::string join_text(const json& j, const std::string& what) {
  if (j.is_string()) return j.get<std::string>();
  if (!j.is_array()) throw Error(Errc::Config, what + " must be a string or a list of strings");
  std::string out;
  for (const auto& s : j) {
    if (!s.is_string()) throw Error(Errc::Config, what + " must be a string or a list of strings");
    out += (out.empty() ? "" : " & ") + s.get<std::string>();
  }
  return out;
}

inline void build_system(Scenario& sc, const json& js) {
  allow_keys(js, "system",
             {"builder", "wtg", "grid", "modes", "edges", "min_dwell", "schedule", "state_names", "input_names",
              "channels"});
  if (js.contains("builder")) {
    sc.source = js.at("builder").get<std::string>();
    if (sc.source != "fourbus" && sc.source != "ninebus")
      throw Error(Errc::Config, "system.builder must be 'fourbus' or 'ninebus'");
    if (js.contains("wtg")) read_wtg(js.at("wtg"), sc.wtg);
    if (js.contains("grid")) read_grid(js.at("grid"), sc.grid);
    sc.wtg.validate();
    const WtgPipeline pipe = build_wtg(sc.wtg);
    auto [sys, sched] = assemble_switched(pipe.kron, sc.grid);
    sc.sys = std::move(sys);
    sc.schedule = std::move(sched);
    Vector dpd(fourbus::kStates, 0.0);
    dpd[fourbus::kDw] = -sc.grid.ws / (2 * sc.grid.H);
    sc.channels["dPd"] = dpd;
    if (sc.source == "ninebus") {
      const auto lines = line_flow_outputs(ninebus::network(sc.grid), ninebus::injections(pipe.kron, sc.grid),
                                           sc.sys.n(), sc.sys.p());
      for (const auto& l : lines) {
        VariableDecl v;
        v.name = l.name;
        v.state_row = l.a;
        v.input_row = l.c;
        v.bias = l.bias;
        sc.vars.push_back(v);
      }
    }
    return;
  }
  sc.source = "matrices";
  if (!js.contains("modes") || !js.at("modes").is_array() || js.at("modes").empty())
    throw Error(Errc::Config, "system needs a builder or a non-empty modes list");
  const auto& jm = js.at("modes");
  std::size_t n = 0, p = 0, m = 0;
  {
    const auto& a = jm[0].at("A");
    n = a.size();
    p = jm[0].contains("B") && !jm[0].at("B").empty() ? jm[0].at("B")[0].size() : 0;
    m = jm[0].contains("Sigma") && !jm[0].at("Sigma").empty() ? jm[0].at("Sigma")[0].size() : 0;
  }
  for (std::size_t q = 0; q < jm.size(); ++q) {
    const auto& e = jm[q];
    const std::string w = "system.modes[" + std::to_string(q) + "]";
    allow_keys(e, w, {"name", "A", "B", "Sigma", "drift"});
    Mode md;
    md.name = get_or<std::string>(e, "name", "q" + std::to_string(q));
    md.A = mat(e.at("A"), n, n, w + ".A");
    md.B = e.contains("B") ? mat(e.at("B"), n, p, w + ".B") : Matrix(n, p);
    md.Sigma = e.contains("Sigma") ? mat(e.at("Sigma"), n, m, w + ".Sigma") : Matrix(n, m);
    if (e.contains("drift")) md.drift = vec(e.at("drift"), w + ".drift");
    sc.sys.modes.push_back(std::move(md));
  }
  for (const auto& e : get_or<std::vector<std::pair<int, int>>>(js, "edges", {})) sc.sys.edges.push_back(e);
  sc.sys.min_dwell = get_or(js, "min_dwell", 1e-9);
  sc.sys.state_names = get_or<std::vector<std::string>>(js, "state_names", {});
  sc.sys.input_names = get_or<std::vector<std::string>>(js, "input_names", {});
  if (!js.contains("schedule")) throw Error(Errc::Config, "system.schedule is required for explicit matrices");
  for (const auto& s : js.at("schedule")) {
    if (!s.is_array() || s.size() != 2) throw Error(Errc::Config, "schedule entries are [mode, dwell]");
    sc.schedule.segments.push_back({s[0].get<int>(), s[1].get<double>()});
  }
  if (js.contains("channels"))
    for (const auto& [k, v] : js.at("channels").items()) {
      Vector d = vec(v, "system.channels." + k);
      if (d.size() != n) throw Error(Errc::Config, "channel '" + k + "' needs " + std::to_string(n) + " entries");
      sc.channels[k] = d;
    }
  try {
    sc.sys.validate();
    sc.schedule.validate(sc.sys);
  } catch (const Error& e) {
    throw Error(Errc::Config, std::string("system: ") + e.what());
  }
}

inline void read_variables(Scenario& sc, const json& jv) {
  if (!jv.is_array()) throw Error(Errc::Config, "variables must be a list");
  for (const auto& e : jv) {
    allow_keys(e, "variable", {"name", "state", "input", "row", "input_row", "bias", "scale"});
    VariableDecl v;
    v.name = e.at("name").get<std::string>();
    v.scale = get_or(e, "scale", 1.0);
    if (e.contains("state")) {
      v.kind = VarKind::State;
      v.index = name_or_index(e.at("state"), sc.sys.state_names, "variable state");
      if (v.index >= sc.sys.n()) throw Error(Errc::Config, "variable '" + v.name + "' state index out of range");
    } else if (e.contains("input")) {
      v.kind = VarKind::Input;
      v.index = name_or_index(e.at("input"), sc.sys.input_names, "variable input");
      if (v.index >= sc.sys.p()) throw Error(Errc::Config, "variable '" + v.name + "' input index out of range");
    } else if (e.contains("row")) {
      v.state_row = vec(e.at("row"), "variable row");
      v.input_row = e.contains("input_row") ? vec(e.at("input_row"), "variable input_row") : Vector(sc.sys.p(), 0.0);
      v.bias = get_or(e, "bias", 0.0);
      if (v.state_row.size() != sc.sys.n() || v.input_row.size() != sc.sys.p())
        throw Error(Errc::Config, "variable '" + v.name + "' row dimensions");
    } else {
      throw Error(Errc::Config, "variable '" + v.name + "' needs state, input or row");
    }
    if (sc.variable(v.name)) throw Error(Errc::Config, "variable '" + v.name + "' declared twice");
    sc.vars.push_back(std::move(v));
  }
}

}  // namespace detail

inline Scenario parse_scenario(const json& j, const std::string& fallback_name = "scenario") {
  detail::allow_keys(j, "scenario",
                     {"name", "description", "system", "x0", "variables", "formula", "pool", "certificate", "synthesis",
                      "feedback", "simulation", "output"});
  Scenario sc;
  sc.name = detail::get_or<std::string>(j, "name", fallback_name);
  if (!j.contains("system")) throw Error(Errc::Config, "scenario needs a system section");
  detail::build_system(sc, j.at("system"));
  sc.x0 = j.contains("x0") ? detail::vec(j.at("x0"), "x0") : Vector(sc.sys.n(), 0.0);
  if (sc.x0.size() != sc.sys.n()) throw Error(Errc::Config, "x0 needs " + std::to_string(sc.sys.n()) + " entries");
  if (j.contains("variables")) detail::read_variables(sc, j.at("variables"));

  // Options first: the formula horizon is checked against them.
  if (j.contains("certificate")) {
    const auto& c = j.at("certificate");
    detail::allow_keys(c, "certificate",
                       {"mu", "epsilon", "t_end", "r_factor", "r0", "zeta", "shape_state", "method", "bands", "max_iter"});
    sc.cert.mu = detail::get_or(c, "mu", sc.cert.mu);
    sc.cert.epsilon = detail::get_or(c, "epsilon", sc.cert.epsilon);
    sc.cert.t_end = detail::get_or(c, "t_end", sc.cert.t_end);
    sc.cert.r_factor = detail::get_or(c, "r_factor", sc.cert.r_factor);
    if (c.contains("r0")) sc.cert.r0 = c.at("r0").get<double>();
    sc.cert.zeta = detail::get_or(c, "zeta", sc.cert.zeta);
    if (c.contains("shape_state"))
      sc.cert.shape_index = detail::name_or_index(c.at("shape_state"), sc.sys.state_names, "certificate.shape_state");
    sc.cert.method = detail::get_or<std::string>(c, "method", sc.cert.method);
    sc.cert.max_iter = detail::get_or(c, "max_iter", sc.cert.max_iter);
    sc.bands = detail::get_or<std::map<std::string, double>>(c, "bands", {});
  }
  if (!(sc.cert.mu > 0) || !(sc.cert.epsilon > 0 && sc.cert.epsilon < 1) || !(sc.cert.t_end > 0))
    throw Error(Errc::Config, "certificate needs mu > 0, 0 < epsilon < 1, t_end > 0");
  if (sc.cert.method != "full" && sc.cert.method != "diag")
    throw Error(Errc::Config, "certificate.method must be 'full' or 'diag'");
  if (j.contains("synthesis")) {
    const auto& s = j.at("synthesis");
    detail::allow_keys(s, "synthesis", {"dt", "horizon", "margin", "weights", "bounds", "use_pool"});
    sc.synth.dt = detail::get_or(s, "dt", sc.synth.dt);
    sc.synth.horizon = detail::get_or(s, "horizon", sc.synth.horizon);
    sc.synth.margin = detail::get_or(s, "margin", sc.synth.margin);
    if (s.contains("weights")) sc.synth.weights = detail::vec(s.at("weights"), "synthesis.weights");
    if (s.contains("bounds")) sc.synth.bounds = detail::vec(s.at("bounds"), "synthesis.bounds");
    sc.synth.use_pool = detail::get_or(s, "use_pool", sc.synth.use_pool);
  }
  if (!(sc.synth.dt > 0) || !(sc.synth.horizon > 0)) throw Error(Errc::Config, "synthesis needs dt, horizon > 0");
  if (!sc.synth.weights.empty() && sc.synth.weights.size() != sc.sys.p())
    throw Error(Errc::Config, "synthesis.weights needs one entry per input");
  if (j.contains("simulation")) {
    const auto& s = j.at("simulation");
    detail::allow_keys(s, "simulation",
                       {"dt", "horizon", "substeps", "paths", "seed", "controller", "threads", "noise", "disturbances"});
    sc.sim.dt = detail::get_or(s, "dt", sc.synth.dt);
    sc.sim.horizon = detail::get_or(s, "horizon", sc.synth.horizon);
    sc.sim.substeps = detail::get_or(s, "substeps", sc.sim.substeps);
    sc.sim.paths = detail::get_or(s, "paths", sc.sim.paths);
    sc.sim.seed = detail::get_or(s, "seed", sc.sim.seed);
    sc.sim.threads = detail::get_or(s, "threads", sc.sim.threads);
    sc.sim.noise = detail::get_or(s, "noise", sc.sim.noise);
    sc.controller = detail::get_or<std::string>(s, "controller", sc.controller);
    if (s.contains("disturbances"))
      for (const auto& d : s.at("disturbances")) {
        detail::allow_keys(d, "simulation.disturbances[]", {"channel", "window", "magnitude"});
        const Vector w = detail::vec(d.at("window"), "disturbance window");
        if (w.size() != 2) throw Error(Errc::Config, "disturbance window is [t1, t2]");
        sc.sim.disturbances.push_back(sc.disturbance(d.at("channel").get<std::string>(), w[0], w[1],
                                                     d.at("magnitude").get<double>()));
      }
  } else {
    sc.sim.dt = sc.synth.dt;
    sc.sim.horizon = sc.synth.horizon;
  }
  if (sc.controller != "none" && sc.controller != "feedforward" && sc.controller != "feedback")
    throw Error(Errc::Config, "simulation.controller must be none, feedforward or feedback");
  try {
    sc.sim.validate();
  } catch (const Error& e) {
    throw Error(Errc::Config, std::string("simulation: ") + e.what());
  }
  if (j.contains("feedback")) {
    const auto& f = j.at("feedback");
    detail::allow_keys(f, "feedback", {"centers", "rho", "seed", "delay", "anticipate"});
    sc.feedback.centers = detail::get_or(f, "centers", sc.feedback.centers);
    sc.feedback.rho = detail::get_or(f, "rho", sc.feedback.rho);
    sc.feedback.seed = detail::get_or(f, "seed", sc.feedback.seed);
    sc.feedback.delay = detail::get_or(f, "delay", sc.feedback.delay);
    if (f.contains("anticipate"))
      for (const auto& a : f.at("anticipate")) {
        detail::allow_keys(a, "feedback.anticipate[]", {"channel", "window", "magnitudes"});
        AnticipatedScript s;
        s.channel = a.at("channel").get<std::string>();
        const Vector w = detail::vec(a.at("window"), "anticipate window");
        if (w.size() != 2) throw Error(Errc::Config, "anticipate window is [t1, t2]");
        s.t1 = w[0];
        s.t2 = w[1];
        s.magnitudes = detail::vec(a.at("magnitudes"), "anticipate magnitudes");
        sc.disturbance(s.channel, s.t1, s.t2, 0.0);  // validates the channel
        sc.feedback.anticipate.push_back(std::move(s));
      }
  }
  if (sc.feedback.centers < 1) throw Error(Errc::Config, "feedback.centers must be at least 1");

  if (!j.contains("formula")) throw Error(Errc::Config, "scenario needs a formula");
  sc.formula_text = detail::join_text(j.at("formula"), "formula");
  if (j.contains("pool")) sc.pool_text = detail::join_text(j.at("pool"), "pool");
  const ParseOptions po{sc.sys.n(), sc.sys.p(), true};
  try {
    auto pf = parse_formula(sc.formula_text, sc.vars, po);
    sc.formula = pf.formula;
    std::string full_text = sc.formula_text;
    if (!sc.pool_text.empty()) {
      auto pp = parse_formula(sc.pool_text, sc.vars, po);
      sc.pool = pp.formula;
      full_text += " & " + sc.pool_text;
    }
    auto pfull = parse_formula(full_text, sc.vars, po);
    sc.full = pfull.formula;
    sc.warnings = pfull.warnings;
    fragment_terms(sc.full);
  } catch (const Error& e) {
    throw Error(Errc::Config, std::string("formula: ") + e.what());
  }
  for (const auto& [k, v] : sc.bands)
    if (!sc.variable(k)) throw Error(Errc::Config, "certificate.bands names unknown variable '" + k + "'");
  if (sc.synth.horizon > sc.schedule.total() + 1e-9) throw Error(Errc::Config, "synthesis horizon exceeds the schedule");
  sc.output = detail::get_or<std::string>(j, "output", "out/" + sc.name);
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Config, "cannot open scenario '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);  // comments allowed
  } catch (const json::parse_error& e) {
    throw Error(Errc::Config, "scenario '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_scenario(j, path.stem().string());
}

}  // namespace certsynth
