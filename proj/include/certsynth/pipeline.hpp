#pragma once

// Scenario-level steps shared by the command line tool and the acceptance
// run, plus JSON (de)serialization of their artifacts.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "certsynth/bisim.hpp"
#include "certsynth/feedback.hpp"
#include "certsynth/mcsim.hpp"
#include "certsynth/scenario.hpp"
#include "certsynth/synth.hpp"

namespace certsynth {

// ---------------------------------------------------------------------------
// certify

/// Certificate options with the formula's normals and any band overrides.
inline CertOptions certificate_options(const Scenario& sc) {
  CertOptions o = sc.cert;
  if (o.normals.empty()) fragment_normals(sc.full, o.normals, o.bands);
  for (const auto& [name, band] : sc.bands) {
    const VariableDecl* v = sc.variable(name);
    Vector a(sc.sys.n(), 0.0);
    if (!v->state_row.empty()) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = v->scale * v->state_row[i];
    } else if (v->kind == VarKind::State) {
      a[v->index] = v->scale;
    } else {
      throw Error(Errc::Config, "band override on input variable '" + name + "'");
    }
    const double na = norm2(a);
    if (na == 0.0) throw Error(Errc::Config, "variable '" + name + "' has no state part");
    bool hit = false;
    for (std::size_t k = 0; k < o.normals.size(); ++k)
      if (std::abs(std::abs(dot(o.normals[k], a)) / na - 1.0) < 1e-9) {
        o.bands[k] = band / na;
        hit = true;
      }
    if (!hit) throw Error(Errc::Config, "variable '" + name + "' does not appear in the formula");
  }
  return o;
}

inline BisimCertificate run_certify(const Scenario& sc) {
  return optimize_certificate(sc.sys, sc.schedule, certificate_options(sc));
}

struct OffsetRow {
  std::string label;
  double tau = 0.0;
  double delta = 0.0;          // normalized units, first segment
  double delta_natural = 0.0;  // in the variable's own units
};

inline std::vector<OffsetRow> offset_rows(const BisimCertificate& cert, const Formula& f) {
  std::vector<OffsetRow> out;
  const auto terms = fragment_terms(f);
  const OffsetTable tab = offset_table(cert, f);
  for (std::size_t k = 0; k < terms.size(); ++k)
    for (std::size_t i = 0; i < terms[k].preds.size(); ++i) {
      const auto& p = terms[k].preds[i];
      const double d = tab.delta[k][i][0];
      out.push_back({p.label, terms[k].tau, d, d * p.unit});
    }
  return out;
}

// ---------------------------------------------------------------------------
// synth

inline SynthesisProblem synthesis_problem(const Scenario& sc, const BisimCertificate& cert, bool with_pool_terms) {
  SynthesisProblem pr;
  pr.sys = &sc.sys;
  pr.schedule = sc.schedule.truncated(sc.synth.horizon);
  pr.x0 = sc.x0;
  const Formula f = with_pool_terms ? sc.full : sc.formula;
  pr.formula = robustify(f, delta_offsets(cert, f));
  pr.dt = sc.synth.dt;
  pr.weights = sc.synth.weights;
  pr.bounds = sc.synth.bounds;
  pr.margin = sc.synth.margin;
  return pr;
}

/// Robust-modified pool, or null without one.
inline Formula robust_pool(const Scenario& sc, const BisimCertificate& cert) {
  return sc.pool ? robustify(sc.pool, delta_offsets(cert, sc.pool)) : Formula{};
}

inline SynthesisResult run_synth(const Scenario& sc, const BisimCertificate& cert, bool use_pool) {
  if (use_pool && sc.pool) return synthesize_iterative(synthesis_problem(sc, cert, false), robust_pool(sc, cert));
  return synthesize(synthesis_problem(sc, cert, true));
}

// ---------------------------------------------------------------------------
// feedback

/// The synthesis problem behind the feedback library: the full robust
/// formula when a pool exists, so every trace meets every constraint.
inline NominalLibrary run_feedback(const Scenario& sc, const BisimCertificate& cert, std::size_t centers, double rho) {
  const SynthesisProblem base = synthesis_problem(sc, cert, true);
  const auto cs = default_centers(cert, sc.x0, centers, sc.feedback.seed);
  std::vector<std::vector<Disturbance>> scripts;
  for (const auto& a : sc.feedback.anticipate)
    for (double m : a.magnitudes) scripts.push_back({sc.disturbance(a.channel, a.t1, a.t2, m)});
  return build_library(base, cs, rho, cert, scripts, sc.feedback.delay);
}

// ---------------------------------------------------------------------------
// verify

/// Controller named by `kind` over the given artifacts.
inline ControllerFactory make_controller(const std::string& kind, const Scenario& sc, const std::vector<Vector>* u,
                                         const NominalLibrary* lib) {
  if (kind == "none") return [p = sc.sys.p()] { return std::make_unique<ZeroController>(p); };
  if (kind == "feedforward") {
    if (!u) throw Error(Errc::Precondition, "feedforward needs a synthesized input");
    return [u] { return std::make_unique<FeedforwardController>(u); };
  }
  if (kind == "feedback") {
    if (!lib) throw Error(Errc::Precondition, "feedback needs a library");
    return [lib] { return std::make_unique<FeedbackController>(lib); };
  }
  throw Error(Errc::Config, "unknown controller '" + kind + "'");
}

inline BatchReport run_verify(const Scenario& sc, const SimConfig& cfg, ControllerFactory ctrl,
                              const BisimCertificate* cert, const SignalTrace* nominal,
                              std::vector<SignalTrace>* traces = nullptr) {
  BatchInput in;
  in.sys = &sc.sys;
  in.schedule = sc.schedule;
  in.x0 = sc.x0;
  in.spec = sc.full;
  in.controller = std::move(ctrl);
  in.cert = cert;
  in.nominal = nominal;
  in.keep_traces = traces != nullptr;
  return run_batch(in, cfg, traces);
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (std::size_t k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(r);
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j) {
  const std::size_t r = j.size(), c = r ? j[0].size() : 0;
  return detail::mat(j, r, c, "matrix");
}

inline json to_json(const BisimCertificate& c) {
  json modes = json::array();
  for (const auto& m : c.modes) modes.push_back({{"M", to_json(m.M)}, {"mu", m.mu}, {"alpha", m.alpha}});
  return {{"coords", c.coords},
          {"modes", modes},
          {"epsilon", c.epsilon},
          {"t_end", c.t_end},
          {"gamma_hat", c.gamma_hat},
          {"zeta", c.zeta},
          {"method", c.method},
          {"segment_mode", c.segment_mode},
          {"segment_start", c.segment_start},
          {"segment_dwell", c.segment_dwell},
          {"segment_r", c.segment_r}};
}

inline BisimCertificate certificate_from_json(const json& j) {
  try {
    BisimCertificate c;
    c.coords = j.at("coords").get<std::vector<std::size_t>>();
    for (const auto& m : j.at("modes"))
      c.modes.push_back({matrix_from_json(m.at("M")), m.at("mu").get<double>(), m.at("alpha").get<double>()});
    c.epsilon = j.at("epsilon").get<double>();
    c.t_end = j.at("t_end").get<double>();
    c.gamma_hat = j.at("gamma_hat").get<double>();
    c.zeta = j.at("zeta").get<double>();
    c.method = j.at("method").get<std::string>();
    c.segment_mode = j.at("segment_mode").get<std::vector<int>>();
    c.segment_start = j.at("segment_start").get<Vector>();
    c.segment_dwell = j.at("segment_dwell").get<Vector>();
    c.segment_r = j.at("segment_r").get<Vector>();
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::Config, std::string("malformed certificate: ") + e.what());
  }
}

inline json to_json(const SynthesisResult& r) {
  json active = json::array();
  for (const auto& a : r.active) active.push_back({{"label", a.label}, {"t", a.t}, {"dual", a.dual}});
  return {{"u", r.u},
          {"robustness", r.robustness},
          {"objective", r.objective},
          {"rows", r.rows},
          {"lp_iterations", r.lp_iterations},
          {"rounds", r.rounds},
          {"added", r.added},
          {"active", active}};
}

inline std::vector<Vector> inputs_from_json(const json& j) {
  try {
    return j.at("u").get<std::vector<Vector>>();
  } catch (const json::exception& e) {
    throw Error(Errc::Config, std::string("malformed input file: ") + e.what());
  }
}

inline json to_json(const NominalLibrary& lib) {
  json traces = json::array();
  for (const auto& t : lib.traces) {
    json ext = json::array();
    for (const auto& e : t.ext) ext.push_back({{"segment", e.segment}, {"t_switch", e.t_switch}, {"u", e.u}});
    traces.push_back({{"x0", t.x0},
                      {"u", t.u},
                      {"states", t.nominal.states},
                      {"robustness", t.robustness},
                      {"objective", t.objective},
                      {"ext", ext}});
  }
  return {{"rho", lib.rho}, {"dt", lib.dt}, {"warnings", lib.warnings}, {"certificate", to_json(lib.cert)},
          {"traces", traces}};
}

inline NominalLibrary library_from_json(const json& j) {
  try {
    NominalLibrary lib;
    lib.rho = j.at("rho").get<double>();
    lib.dt = j.at("dt").get<double>();
    lib.warnings = j.at("warnings").get<std::vector<std::string>>();
    lib.cert = certificate_from_json(j.at("certificate"));
    for (const auto& t : j.at("traces")) {
      LibraryTrace tr;
      tr.x0 = t.at("x0").get<Vector>();
      tr.u = t.at("u").get<std::vector<Vector>>();
      tr.nominal.dt = lib.dt;
      tr.nominal.states = t.at("states").get<std::vector<Vector>>();
      for (std::size_t k = 0; k < tr.nominal.states.size(); ++k)
        tr.nominal.times.push_back(static_cast<double>(k) * lib.dt);
      tr.robustness = t.at("robustness").get<double>();
      tr.objective = t.at("objective").get<double>();
      for (const auto& e : t.at("ext"))
        tr.ext.push_back({e.at("segment").get<std::size_t>(), e.at("t_switch").get<double>(),
                          e.at("u").get<std::vector<Vector>>()});
      lib.traces.push_back(std::move(tr));
    }
    return lib;
  } catch (const json::exception& e) {
    throw Error(Errc::Config, std::string("malformed library: ") + e.what());
  }
}

inline json to_json(const BatchReport& r) {
  return {{"paths", r.robustness.size()},
          {"satisfied", r.satisfied},
          {"rate", r.rate()},
          {"min_robustness", r.min_robustness},
          {"mean_robustness", r.mean_robustness}};
}

}  // namespace certsynth
