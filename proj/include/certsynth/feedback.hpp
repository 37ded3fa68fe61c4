#pragma once

// Lookup feedback law over a library of nominal trajectories: the state is
// matched against the shrinking balls around every library sample and the
// matched trajectory's input is replayed.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "certsynth/bisim.hpp"
#include "certsynth/error.hpp"
#include "certsynth/mcsim.hpp"
#include "certsynth/synth.hpp"

namespace certsynth {

/// Inputs of a trajectory re-solved with segment `segment` lasting ϱ longer,
/// restricted to [t_switch, t_switch + ϱ).
struct Extension {
  std::size_t segment = 0;
  double t_switch = 0.0;
  std::vector<Vector> u;
};

struct LibraryTrace {
  Vector x0;
  std::vector<Vector> u;
  SignalTrace nominal;
  double robustness = 0.0;
  double objective = 0.0;
  std::vector<Extension> ext;
};

struct NominalLibrary {
  std::vector<LibraryTrace> traces;
  BisimCertificate cert;
  double rho = 0.0;
  double dt = 0.0;
  std::vector<std::string> warnings;

  std::size_t size() const { return traces.size(); }
  std::size_t rho_steps() const { return static_cast<std::size_t>(std::llround(rho / dt)); }
};

/// The center and N−1 points on the boundary of B(x0, r) along seeded random
/// directions in the certified coordinates.
inline std::vector<Vector> default_centers(const BisimCertificate& cert, const Vector& x0, std::size_t count,
                                           std::uint64_t seed = 1) {
  std::vector<Vector> out{x0};
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  const Matrix& m = cert.mode(cert.segment_mode.front()).M;
  const double r = cert.segment_r.front();
  while (out.size() < count) {
    Vector d(cert.coords.size());
    for (double& v : d) v = nd(gen);
    const double s = std::sqrt(r / quad_form(m, d));
    Vector x = x0;
    for (std::size_t i = 0; i < d.size(); ++i) x[cert.coords[i]] += s * d[i];
    out.push_back(std::move(x));
  }
  return out;
}

/// One synthesis per center (failed centers are dropped with a warning) plus
/// the per-switch extensions. Each entry of `scenarios` adds one more trace
/// from the first center synthesized against that anticipated disturbance
/// script; its first `delay` inputs are pinned to the first trace's, since
/// the law cannot tell the two apart before then.
inline NominalLibrary build_library(const SynthesisProblem& base, const std::vector<Vector>& centers, double rho,
                                    const BisimCertificate& cert,
                                    const std::vector<std::vector<Disturbance>>& scenarios = {},
                                    std::size_t delay = 1) {
  if (centers.empty()) throw Error(Errc::Precondition, "library needs at least one center");
  double min_dwell = kInf;
  for (const auto& s : base.schedule.segments) min_dwell = std::min(min_dwell, s.dwell);
  if (!(rho > 0) || rho >= min_dwell) throw Error(Errc::Precondition, "rho must lie in (0, min dwell)");
  steps_in(rho, base.dt);
  NominalLibrary lib;
  lib.cert = cert;
  lib.rho = rho;
  lib.dt = base.dt;
  const std::size_t total = centers.size() + scenarios.size();
  for (std::size_t l = 0; l < total; ++l) {
    SynthesisProblem prob = base;
    if (l < centers.size()) {
      prob.x0 = centers[l];
    } else {
      if (lib.traces.empty()) throw Error(Errc::Infeasible, "disturbance traces need a feasible first center");
      const auto& sc = scenarios[l - centers.size()];
      prob.x0 = centers.front();
      prob.anticipated.insert(prob.anticipated.end(), sc.begin(), sc.end());
      const auto& u0 = lib.traces.front().u;
      prob.prefix.assign(u0.begin(), u0.begin() + static_cast<std::ptrdiff_t>(std::min(delay, u0.size())));
    }
    LibraryTrace tr;
    try {
      SynthesisResult res = synthesize(prob);
      tr.x0 = prob.x0;
      tr.u = std::move(res.u);
      tr.nominal = std::move(res.nominal);
      tr.robustness = res.robustness;
      tr.objective = res.objective;
    } catch (const Error& e) {
      if (e.code() != Errc::Infeasible) throw;
      lib.warnings.push_back("center " + std::to_string(l) + " dropped: " + e.what());
      continue;
    }
    if (tr.robustness < 0)
      throw Error(Errc::CertificateCheckFailed, "library trace " + std::to_string(l) + " has negative robustness");
    // Extensions: stay ϱ longer in each mode before its switch.
    double t = 0;
    for (std::size_t s = 0; s + 1 < base.schedule.segments.size(); ++s) {
      t += base.schedule.segments[s].dwell;
      SynthesisProblem ep = prob;
      ep.schedule.segments[s].dwell += rho;
      ep.schedule.segments[s + 1].dwell -= rho;
      try {
        const SynthesisResult er = synthesize(ep);
        Extension ex{s, t, {}};
        const std::size_t j0 = steps_in(t, base.dt);
        for (std::size_t k = 0; k < lib.rho_steps() && j0 + k < er.u.size(); ++k) ex.u.push_back(er.u[j0 + k]);
        tr.ext.push_back(std::move(ex));
      } catch (const Error& e) {
        if (e.code() != Errc::Infeasible) throw;
        lib.warnings.push_back("center " + std::to_string(l) + ": no extension at t=" + std::to_string(t));
      }
    }
    lib.traces.push_back(std::move(tr));
  }
  if (lib.traces.empty()) throw Error(Errc::Infeasible, "every library center is infeasible");
  return lib;
}

struct LawState {
  std::size_t active = 0;  // ℓ̂
  std::size_t jhat = 0;    // ĵ
  int mode = 0;
  bool started = false;
  std::size_t switches = 0;
};

struct RegionMatch {
  std::size_t trace = 0;
  std::size_t index = 0;
};

namespace detail {

inline double lib_dist2(const NominalLibrary& lib, const Vector& x, const Vector& xi, double t) {
  return lib.cert.dist2(sub(x, xi), std::min(t, lib.cert.t_end));
}

// Time since the start of the certificate segment containing t.
inline double seg_time(const BisimCertificate& c, double t) {
  const double tc = std::min(t, c.t_end);
  return tc - c.segment_start[c.segment_at(tc)];
}

}  // namespace detail

/// Squared ball radius r̂ = r·e^{−μt/2} at absolute time t.
inline double region_radius(const NominalLibrary& lib, double t) {
  const auto& c = lib.cert;
  const std::size_t s = c.segment_at(std::min(t, c.t_end));
  return c.segment_r[s] * std::exp(-c.mode(c.segment_mode[s]).mu * detail::seg_time(c, t) / 2);
}

/// Whether x lies in the stochastic robust neighbourhood of the active sample.
inline bool in_robust_neighbourhood(const NominalLibrary& lib, const LawState& st, const Vector& x, double t) {
  const auto& tr = lib.traces[st.active];
  const std::size_t j = std::min(st.jhat, tr.nominal.size() - 1);
  const auto& c = lib.cert;
  const std::size_t s = c.segment_at(std::min(t, c.t_end));
  const double decay = std::exp(-c.mode(c.segment_mode[s]).mu * detail::seg_time(c, t));
  const double rad = std::sqrt(c.segment_r[s] * decay) + std::sqrt(c.gamma_hat * decay);
  return detail::lib_dist2(lib, x, tr.nominal.states[j], t) <= rad * rad;
}

/// Ordered membership: traces from the last to the first, later indices
/// before earlier ones, restricted to indices in [jt, jt + ϱ].
inline std::optional<RegionMatch> region_membership(const NominalLibrary& lib, const Vector& x, std::size_t jt) {
  const double t = static_cast<double>(jt) * lib.dt;
  const double r2 = region_radius(lib, t);
  for (std::size_t l = lib.size(); l-- > 0;) {
    const auto& tr = lib.traces[l];
    const std::size_t last = tr.nominal.size() - 1;
    if (jt > last) continue;
    const std::size_t hi = std::min(last, jt + lib.rho_steps());
    for (std::size_t i = hi + 1; i-- > jt;)
      if (detail::lib_dist2(lib, x, tr.nominal.states[i], t) <= r2) return RegionMatch{l, i};
  }
  return std::nullopt;
}

/// One evaluation of the law at step j; updates the state.
inline Vector law_eval(const NominalLibrary& lib, LawState& st, const Vector& x, int q, std::size_t j) {
  const double t = static_cast<double>(j) * lib.dt;
  if (!st.started) {
    // Start on the nearest center.
    double best = kInf;
    for (std::size_t l = 0; l < lib.size(); ++l) {
      const double d = detail::lib_dist2(lib, x, lib.traces[l].nominal.states.front(), 0.0);
      if (d < best) {
        best = d;
        st.active = l;
      }
    }
    st.jhat = j;
    st.mode = q;
    st.started = true;
  }
  st.mode = q;
  if (!in_robust_neighbourhood(lib, st, x, t)) {
    if (auto m = region_membership(lib, x, j)) {
      if (m->trace != st.active || m->index != st.jhat) ++st.switches;
      st.active = m->trace;
      st.jhat = m->index;
    }
  }
  const auto& tr = lib.traces[st.active];
  const std::size_t idx = std::min(st.jhat, tr.u.size() - 1);
  Vector u = tr.u[idx];
  // The trace index may run ahead of a switch the plant has not made yet.
  const double ti = static_cast<double>(st.jhat) * lib.dt;
  for (const auto& ex : tr.ext) {
    if (ti >= ex.t_switch - 1e-9 && ti < ex.t_switch + lib.rho - 1e-9 && t < ex.t_switch - 1e-9) {
      const auto k = static_cast<std::size_t>(std::llround((ti - ex.t_switch) / lib.dt));
      if (k < ex.u.size()) u = ex.u[k];
    }
  }
  ++st.jhat;
  return u;
}

class FeedbackController : public Controller {
 public:
  explicit FeedbackController(const NominalLibrary* lib) : lib_(lib) {}
  Vector input(std::size_t j, double, const Vector& x, int mode) override { return law_eval(*lib_, st_, x, mode, j); }
  const LawState& state() const { return st_; }

 private:
  const NominalLibrary* lib_;
  LawState st_;
};

}  // namespace certsynth
