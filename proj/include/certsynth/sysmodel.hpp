#pragma once

// Switched stochastic linear systems dx = (A_q x + B_q u + d_q) dt + Σ_q dw,
// time-triggered mode schedules and exact zero-order-hold discretization.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "certsynth/error.hpp"
#include "certsynth/mtl.hpp"
#include "certsynth/numkernel.hpp"

namespace certsynth {

struct Mode {
  std::string name;
  Matrix A;      // n x n
  Matrix B;      // n x p
  Matrix Sigma;  // n x m
  Vector drift;  // n, constant term; empty means zero
};

struct SwitchedLinearSystem {
  std::vector<Mode> modes;
  std::vector<std::pair<int, int>> edges;
  double min_dwell = 1e-9;
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;

  std::size_t n() const { return modes.empty() ? 0 : modes.front().A.rows(); }
  std::size_t p() const { return modes.empty() ? 0 : modes.front().B.cols(); }
  std::size_t m() const { return modes.empty() ? 0 : modes.front().Sigma.cols(); }

  Vector drift(int q) const {
    const auto& d = modes.at(static_cast<std::size_t>(q)).drift;
    return d.empty() ? Vector(n(), 0.0) : d;
  }

  bool has_edge(int a, int b) const {
    for (const auto& e : edges)
      if (e.first == a && e.second == b) return true;
    return false;
  }

  void validate() const {
    if (modes.empty()) throw Error(Errc::InvalidSystem, "system has no modes");
    const std::size_t nn = n(), pp = p(), mm = m();
    if (nn == 0) throw Error(Errc::InvalidSystem, "zero state dimension");
    for (const auto& md : modes) {
      if (md.A.rows() != nn || md.A.cols() != nn) throw Error(Errc::DimensionMismatch, "mode '" + md.name + "' A shape");
      if (md.B.rows() != nn || md.B.cols() != pp) throw Error(Errc::DimensionMismatch, "mode '" + md.name + "' B shape");
      if (md.Sigma.rows() != nn || md.Sigma.cols() != mm)
        throw Error(Errc::DimensionMismatch, "mode '" + md.name + "' Sigma shape");
      if (!md.drift.empty() && md.drift.size() != nn) throw Error(Errc::DimensionMismatch, "mode drift length");
      if (!md.A.all_finite() || !md.B.all_finite() || !md.Sigma.all_finite())
        throw Error(Errc::InvalidSystem, "non-finite entries in mode '" + md.name + "'");
    }
    for (const auto& [a, b] : edges)
      if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= modes.size() || static_cast<std::size_t>(b) >= modes.size())
        throw Error(Errc::InvalidSystem, "edge references a missing mode");
    if (!(min_dwell > 0)) throw Error(Errc::InvalidSystem, "minimal dwell time must be positive");
  }
};

struct ScheduleSegment {
  int mode = 0;
  double dwell = 0.0;
};

struct ModeSchedule {
  std::vector<ScheduleSegment> segments;

  double total() const {
    double t = 0;
    for (const auto& s : segments) t += s.dwell;
    return t;
  }
  /// Absolute start time of each segment.
  Vector starts() const {
    Vector out;
    double t = 0;
    for (const auto& s : segments) {
      out.push_back(t);
      t += s.dwell;
    }
    return out;
  }
  std::size_t segment_at(double t) const {
    double acc = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      acc += segments[i].dwell;
      if (t < acc - 1e-9) return i;
    }
    return segments.empty() ? 0 : segments.size() - 1;
  }
  int mode_at(double t) const { return segments.at(segment_at(t)).mode; }

  /// The schedule restricted to [0, horizon].
  ModeSchedule truncated(double horizon) const {
    ModeSchedule out;
    double t = 0;
    for (const auto& s : segments) {
      if (t >= horizon - 1e-9) break;
      const double d = std::min(s.dwell, horizon - t);
      out.segments.push_back({s.mode, d});
      t += d;
    }
    if (t < horizon - 1e-9) throw Error(Errc::Precondition, "schedule shorter than requested horizon");
    return out;
  }

  /// Checks dwell >= min_dwell for every segment except a truncated final one,
  /// and that consecutive segments follow system edges.
  void validate(const SwitchedLinearSystem& sys, bool final_may_be_short = true) const {
    if (segments.empty()) throw Error(Errc::InvalidSystem, "empty schedule");
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto& s = segments[i];
      if (s.mode < 0 || static_cast<std::size_t>(s.mode) >= sys.modes.size())
        throw Error(Errc::InvalidSystem, "schedule references a missing mode");
      const bool last = i + 1 == segments.size();
      if (!(s.dwell > 0)) throw Error(Errc::InvalidSystem, "non-positive dwell");
      if (s.dwell < sys.min_dwell - 1e-12 && !(last && final_may_be_short))
        throw Error(Errc::InvalidSystem, "dwell shorter than the minimal dwell time");
      if (i > 0 && segments[i - 1].mode != s.mode && !sys.has_edge(segments[i - 1].mode, s.mode))
        throw Error(Errc::InvalidSystem, "schedule uses a transition that is not an edge");
    }
  }
};

/// Number of dt steps in `span`; throws ScheduleMisaligned unless dt divides it.
inline std::size_t steps_in(double span, double dt) {
  if (!(dt > 0)) throw Error(Errc::Precondition, "dt must be positive");
  const double k = span / dt;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-7 * std::max(1.0, k)) throw Error(Errc::ScheduleMisaligned, "dt does not divide " + std::to_string(span));
  return static_cast<std::size_t>(r);
}

/// One exact ZOH step: x+ = ad x + bd u + cd.
struct StepMatrices {
  Matrix ad;
  Matrix bd;
  Vector cd;
  int mode = 0;
};

/// Extra drift active on [t1, t2).
struct Disturbance {
  double t1 = 0.0, t2 = 0.0;
  Vector direction;  // drift added per unit magnitude
  double magnitude = 0.0;
  std::string channel;
};

struct Discretization {
  double dt = 0.0;
  std::vector<StepMatrices> per_segment;  // one per schedule segment
  std::vector<std::size_t> step_segment;  // segment of each step j

  std::size_t steps() const { return step_segment.size(); }
  const StepMatrices& step(std::size_t j) const { return per_segment[step_segment.at(j)]; }
};

inline StepMatrices discretize_mode(const SwitchedLinearSystem& sys, int q, double dt) {
  const auto& md = sys.modes.at(static_cast<std::size_t>(q));
  const std::size_t n = sys.n(), p = sys.p();
  Matrix baug(n, p + 1);
  baug.set_block(0, 0, md.B);
  const Vector d = sys.drift(q);
  for (std::size_t i = 0; i < n; ++i) baug(i, p) = d[i];
  const Discretized z = expm_with_input(md.A, baug, dt);
  StepMatrices s;
  s.ad = z.ad;
  s.bd = z.bd.block(0, 0, n, p);
  s.cd = z.bd.col(p);
  s.mode = q;
  return s;
}

inline Discretization discretize(const SwitchedLinearSystem& sys, const ModeSchedule& sched, double dt) {
  sys.validate();
  Discretization out;
  out.dt = dt;
  for (std::size_t i = 0; i < sched.segments.size(); ++i) {
    const auto& seg = sched.segments[i];
    const std::size_t k = steps_in(seg.dwell, dt);
    // Reuse matrices of an earlier segment in the same mode.
    std::size_t idx = out.per_segment.size();
    for (std::size_t s = 0; s < out.per_segment.size(); ++s)
      if (out.per_segment[s].mode == seg.mode) idx = s;
    if (idx == out.per_segment.size()) out.per_segment.push_back(discretize_mode(sys, seg.mode, dt));
    out.step_segment.insert(out.step_segment.end(), k, idx);
  }
  return out;
}

/// Exact ZOH propagation of the nominal system. `u` holds one input per step
/// (extra trailing samples are ignored). The returned trace has steps+1
/// samples; the last sample repeats the final input.
inline SignalTrace integrate_nominal(const SwitchedLinearSystem& sys, const ModeSchedule& sched, const Vector& x0,
                                     const std::vector<Vector>& u, double dt) {
  const Discretization disc = discretize(sys, sched, dt);
  const std::size_t steps = disc.steps();
  if (x0.size() != sys.n()) throw Error(Errc::DimensionMismatch, "x0 length");
  if (u.size() < steps) throw Error(Errc::DimensionMismatch, "input sequence shorter than the horizon");
  SignalTrace tr;
  tr.dt = dt;
  tr.times.resize(steps + 1);
  tr.states.resize(steps + 1);
  tr.inputs.resize(steps + 1);
  tr.modes.resize(steps + 1);
  if (steps == 0) throw Error(Errc::Precondition, "empty horizon");
  Vector x = x0;
  for (std::size_t j = 0; j <= steps; ++j) {
    const std::size_t held = std::min(j, steps - 1);
    tr.times[j] = static_cast<double>(j) * dt;
    tr.states[j] = x;
    tr.inputs[j] = u[held];
    if (tr.inputs[j].size() != sys.p()) throw Error(Errc::DimensionMismatch, "input vector length");
    tr.modes[j] = disc.step(held).mode;
    if (j == steps) break;
    const StepMatrices& s = disc.step(j);
    Vector nx = s.ad * x;
    const Vector bu = s.bd * u[j];
    for (std::size_t i = 0; i < x.size(); ++i) nx[i] += bu[i] + s.cd[i];
    x = std::move(nx);
  }
  return tr;
}

/// {x̃ | (c−x̃)ᵀM(c−x̃) <= r} measured on `coords`; other coordinates must match
/// the center exactly (they carry no uncertainty).
struct InitialBall {
  Vector center;
  double radius = 0.0;
  Matrix metric;
  std::vector<std::size_t> coords;  // empty: all coordinates

  double distance2(std::span<const double> x) const {
    if (x.size() != center.size()) throw Error(Errc::DimensionMismatch, "ball point dimension");
    Vector d;
    if (coords.empty()) {
      d = sub(x, center);
    } else {
      for (std::size_t i : coords) d.push_back(x[i] - center[i]);
    }
    return quad_form(metric, d);
  }
  bool pinned_match(std::span<const double> x) const {
    if (coords.empty()) return true;
    std::vector<bool> free(center.size(), false);
    for (std::size_t i : coords) free[i] = true;
    for (std::size_t i = 0; i < center.size(); ++i)
      if (!free[i] && std::abs(x[i] - center[i]) > 1e-12 * std::max(1.0, std::abs(center[i]))) return false;
    return true;
  }
};

inline bool ball_contains_point(const InitialBall& ball, std::span<const double> x) {
  return ball.pinned_match(x) && ball.distance2(x) <= ball.radius;
}

}  // namespace certsynth
