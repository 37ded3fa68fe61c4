#pragma once

// Euler–Maruyama simulation of the switched SDE dx = (A_q x + B_q u + d_q)dt
// + Σ_q dw under open- or closed-loop control, Monte Carlo batches and the
// excursion statistics of the bisimulation function.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <thread>
#include <vector>

#include "certsynth/bisim.hpp"
#include "certsynth/error.hpp"
#include "certsynth/mtl.hpp"
#include "certsynth/numkernel.hpp"
#include "certsynth/sysmodel.hpp"

namespace certsynth {

// Counter-based normal variates: (seed, path, step, channel) -> N(0,1).
namespace rng {

inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) { return mix(mix(seed) ^ mix(path + 0x51ed27ULL)); }

inline double normal(std::uint64_t path_key, std::uint64_t step, std::uint64_t channel) {
  // Box–Muller on two uniforms from one mixed counter; the cosine branch only.
  const std::uint64_t base = mix(path_key ^ mix(step * 0x100000001b3ULL + channel));
  const std::uint64_t b2 = mix(base);
  const double u1 = (static_cast<double>(base >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = static_cast<double>(b2 >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
}

}  // namespace rng

/// Per-path controller: asked once per recording step.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual Vector input(std::size_t j, double t, const Vector& x, int mode) = 0;
};

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

class ZeroController : public Controller {
 public:
  explicit ZeroController(std::size_t p) : u_(p, 0.0) {}
  Vector input(std::size_t, double, const Vector&, int) override { return u_; }

 private:
  Vector u_;
};

/// Replays u[j], holding the last input beyond the sequence.
class FeedforwardController : public Controller {
 public:
  explicit FeedforwardController(const std::vector<Vector>* u) : u_(u) {}
  Vector input(std::size_t j, double, const Vector&, int) override {
    if (u_->empty()) throw Error(Errc::Precondition, "empty feedforward sequence");
    return (*u_)[std::min(j, u_->size() - 1)];
  }

 private:
  const std::vector<Vector>* u_;
};

struct SimConfig {
  double dt = 0.01;
  double horizon = 5.0;
  int substeps = 1;  // Euler–Maruyama steps per recording step
  std::size_t paths = 100;
  std::uint64_t seed = 1;
  std::vector<Disturbance> disturbances;
  bool noise = true;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (!(dt > 0) || !(horizon > 0)) throw Error(Errc::Config, "dt and horizon must be positive");
    steps_in(horizon, dt);
    if (substeps < 1) throw Error(Errc::Config, "substeps must be at least 1");
    if (paths < 1) throw Error(Errc::Config, "paths must be at least 1");
  }
};

/// One path. The schedule's last mode persists beyond its end.
inline SignalTrace simulate_sde(const SwitchedLinearSystem& sys, const ModeSchedule& sched, const Vector& x0,
                                Controller& ctrl, const SimConfig& cfg, std::uint64_t path_key) {
  cfg.validate();
  if (x0.size() != sys.n()) throw Error(Errc::DimensionMismatch, "x0 length");
  const std::size_t steps = steps_in(cfg.horizon, cfg.dt);
  const double h = cfg.dt / cfg.substeps;
  const double sh = std::sqrt(h);
  const std::size_t n = sys.n(), m = sys.m();
  SignalTrace tr;
  tr.dt = cfg.dt;
  tr.times.resize(steps + 1);
  tr.states.resize(steps + 1);
  tr.inputs.resize(steps + 1);
  tr.modes.resize(steps + 1);
  Vector x = x0;
  Vector dx(n);
  for (std::size_t j = 0; j <= steps; ++j) {
    const double t = static_cast<double>(j) * cfg.dt;
    const int q = sched.mode_at(std::min(t, sched.total() - 1e-12));
    tr.times[j] = t;
    tr.states[j] = x;
    tr.modes[j] = q;
    Vector u = ctrl.input(j, t, x, q);
    if (u.size() != sys.p()) throw Error(Errc::DimensionMismatch, "controller input length");
    tr.inputs[j] = u;
    if (j == steps) break;
    const auto& md = sys.modes[static_cast<std::size_t>(q)];
    Vector d = sys.drift(q);
    for (const auto& dist : cfg.disturbances)
      if (t >= dist.t1 - 1e-9 && t < dist.t2 - 1e-9)
        for (std::size_t i = 0; i < n; ++i) d[i] += dist.magnitude * dist.direction[i];
    const Vector bu = md.B * u;
    for (int s = 0; s < cfg.substeps; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        double v = bu[i] + d[i];
        const auto arow = md.A.row(i);
        for (std::size_t k = 0; k < n; ++k) v += arow[k] * x[k];
        dx[i] = v * h;
      }
      if (cfg.noise && m > 0) {
        const std::uint64_t sub = j * static_cast<std::uint64_t>(cfg.substeps) + static_cast<std::uint64_t>(s);
        for (std::size_t c = 0; c < m; ++c) {
          const double eta = rng::normal(path_key, sub, c) * sh;
          for (std::size_t i = 0; i < n; ++i) dx[i] += md.Sigma(i, c) * eta;
        }
      }
      for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
    }
  }
  return tr;
}

struct BatchReport {
  Vector robustness;  // per path, of the plain specification at t = 0
  std::size_t satisfied = 0;
  double min_robustness = 0.0;
  double mean_robustness = 0.0;
  Vector sup_phi;  // per path, sup_t φ(ξ*, ξ) when a certificate and nominal are given
  std::vector<std::uint64_t> seeds;
  double rate() const { return robustness.empty() ? 0.0 : static_cast<double>(satisfied) / robustness.size(); }
};

struct BatchInput {
  const SwitchedLinearSystem* sys = nullptr;
  ModeSchedule schedule;
  Vector x0;
  Formula spec;
  ControllerFactory controller;
  const BisimCertificate* cert = nullptr;  // optional, for sup φ
  const SignalTrace* nominal = nullptr;    // optional, for sup φ
  std::function<Vector(std::size_t path)> initial;  // optional per-path initial state
  bool keep_traces = false;
};

/// sup over samples of (x−x̃)ᵀM(x−x̃)·e^{μ(t−t_seg)} on the certified coordinates.
inline double sup_phi(const BisimCertificate& cert, const SignalTrace& nominal, const SignalTrace& tr) {
  double best = 0.0;
  const std::size_t len = std::min(nominal.size(), tr.size());
  for (std::size_t j = 0; j < len; ++j) {
    const double t = tr.times[j];
    if (t > cert.t_end + 1e-9) break;
    const std::size_t seg = cert.segment_at(t);
    const auto& mc = cert.mode(cert.segment_mode[seg]);
    const Vector e = cert.project(sub(tr.states[j], nominal.states[j]));
    best = std::max(best, quad_form(mc.M, e) * std::exp(mc.mu * (t - cert.segment_start[seg])));
  }
  return best;
}

inline BatchReport run_batch(const BatchInput& in, const SimConfig& cfg, std::vector<SignalTrace>* traces = nullptr) {
  cfg.validate();
  if (!in.sys || !in.controller) throw Error(Errc::Precondition, "batch needs a system and a controller");
  BatchReport rep;
  const std::size_t np = cfg.paths;
  rep.robustness.assign(np, 0.0);
  rep.seeds.resize(np);
  if (in.cert && in.nominal) rep.sup_phi.assign(np, 0.0);
  if (traces) traces->assign(in.keep_traces ? np : 0, {});
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const std::uint64_t key = rng::path_seed(cfg.seed, p);
      rep.seeds[p] = key;
      auto ctrl = in.controller();
      const Vector x0 = in.initial ? in.initial(p) : in.x0;
      SignalTrace tr = simulate_sde(*in.sys, in.schedule, x0, *ctrl, cfg, key);
      rep.robustness[p] = in.spec ? robustness(in.spec, tr, 0.0) : 0.0;
      if (!rep.sup_phi.empty()) rep.sup_phi[p] = sup_phi(*in.cert, *in.nominal, tr);
      if (traces && in.keep_traces) (*traces)[p] = std::move(tr);
    }
  };
  unsigned nt = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  nt = static_cast<unsigned>(std::min<std::size_t>(nt, np));
  if (nt <= 1) {
    work(0, np);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(nt);
    for (unsigned t = 0; t < nt; ++t)
      pool.emplace_back([&, t] {
        try {
          work(np * t / nt, np * (t + 1) / nt);
        } catch (...) {
          errs[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  }
  rep.min_robustness = *std::min_element(rep.robustness.begin(), rep.robustness.end());
  double s = 0;
  for (double r : rep.robustness) {
    s += r;
    if (r >= 0) ++rep.satisfied;
  }
  rep.mean_robustness = s / static_cast<double>(np);
  return rep;
}

struct ExcursionRow {
  double gamma = 0.0;
  double frequency = 0.0;
  double half_width = 0.0;  // 3 binomial standard errors
  double bound = 0.0;       // α·T/γ
};

inline std::vector<ExcursionRow> excursion_stats(const Vector& sup_values, double alpha, double horizon,
                                                 const Vector& gammas) {
  std::vector<ExcursionRow> out;
  const double n = static_cast<double>(sup_values.size());
  if (n == 0) throw Error(Errc::Precondition, "no paths");
  for (double g : gammas) {
    if (!(g > 0)) throw Error(Errc::Precondition, "gamma must be positive");
    double hits = 0;
    for (double v : sup_values)
      if (v >= g) hits += 1;
    const double p = hits / n;
    out.push_back({g, p, 3 * std::sqrt(p * (1 - p) / n), alpha * horizon / g});
  }
  return out;
}

}  // namespace certsynth
