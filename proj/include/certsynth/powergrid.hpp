#pragma once

// Type-C wind turbine model, its linearization and Kron reduction, the
// switched frequency-response model of the four-bus grid and the DC line-flow
// outputs of the nine-bus grid.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "certsynth/error.hpp"
#include "certsynth/numkernel.hpp"
#include "certsynth/sysmodel.hpp"

namespace certsynth {

struct WtgParams {
  double Rs = 0.00706, Rr = 0.005, Xm = 2.9, Xs = 3.071, Xr = 3.056, Xt = 0.05;
  double HD = 3.5;
  double ws = 377.0;  // rad/s
  double KP1 = 1.0, KI1 = 5.0, KP2 = 0.3, KI2 = 8.0, KP3 = 1.0, KI3 = 5.0, KP4 = 0.3, KI4 = 8.0;
  double Rt = 38.5, rho = 1.225, k = 1.0 / 96.0, poles = 4.0, wb = 377.0, Sb = 1e6;
  double Copt = 16.1985e-9;
  double p_gen = 1.5, v_wind = 12.0, q_set = 0.0;
  double v_grid = 1.0, th_grid = 0.0;
  double kw = 1.0;  // noise gain on the rotor speed

  void validate() const {
    for (double v : {Xm, Xs, Xr, Xt, HD, ws, Rt, rho, wb, Sb, Copt, v_wind})
      if (!(v > 0)) throw Error(Errc::Config, "WTG reactances, inertia and turbine constants must be positive");
    if (!(Xs > Xm * Xm / Xr)) throw Error(Errc::Config, "WTG transient reactance must be positive");
  }
};

// State x = [E'q, E'd, ωr, x1, x2, x3, x4]; algebraic
// y = [Pg, Qg, Vdr, Vqr, Idr, Iqr, Ids, Iqs, VD, θD].
inline constexpr std::size_t kWtgStates = 7;
inline constexpr std::size_t kWtgAlg = 10;
namespace wtg {
enum State : std::size_t { Eq, Ed, Wr, X1, X2, X3, X4 };
enum Alg : std::size_t { Pg, Qg, Vdr, Vqr, Idr, Iqr, Ids, Iqs, VD, ThD };
}  // namespace wtg

/// Mechanical torque of the turbine in pu at rotor speed wr and pitch tht.
inline double turbine_torque(const WtgParams& p, double wr, double tht) {
  const double lam = 2 * p.k * wr * p.Rt / (p.poles * p.v_wind);
  const double d1 = lam + 0.08 * tht;
  const double d2 = tht * tht * tht + 1;
  if (d1 == 0.0 || d2 == 0.0) throw Error(Errc::DomainError, "tip-speed ratio denominator vanishes");
  const double inv = 1 / d1 - 0.035 / d2;
  if (inv == 0.0) throw Error(Errc::DomainError, "lambda_i denominator vanishes");
  const double lami = 1 / inv;
  const double cp = 0.22 * (116 / lami - 0.4 * tht - 5) * std::exp(-12.5 / lami);
  if (wr == 0.0) throw Error(Errc::DomainError, "zero rotor speed");
  return 0.5 * p.rho * std::numbers::pi * p.Rt * p.Rt * p.wb * cp * std::pow(p.v_wind, 3) / (p.Sb * wr);
}

/// Stacked residual [f(x,y); g(x,y)] of the WTG differential-algebraic model
/// with power-reference offset uw and pitch angle tht.
inline Vector wtg_residual(const WtgParams& p, std::span<const double> x, std::span<const double> y, double uw,
                           double tht) {
  if (x.size() != kWtgStates || y.size() != kWtgAlg) throw Error(Errc::DimensionMismatch, "WTG vector sizes");
  using namespace wtg;
  const double vd = y[VD];
  if (!(vd > 0)) throw Error(Errc::DomainError, "terminal voltage V_D must be positive");
  const double t0 = p.Xr / (p.ws * p.Rr);
  const double xsp = p.Xs - p.Xm * p.Xm / p.Xr;
  const double wr = x[Wr];
  const double pref = p.Copt * wr * wr * wr + uw;
  const double qref = p.q_set;
  const double tm = turbine_torque(p, wr, tht);
  const double ids = y[Ids], iqs = y[Iqs], idr = y[Idr], iqr = y[Iqr], vdr = y[Vdr], vqr = y[Vqr];
  const double pg = y[Pg], qg = y[Qg];
  Vector r(kWtgStates + kWtgAlg);
  r[0] = -(x[Eq] + (p.Xs - xsp) * ids) / t0 + p.ws * p.Xm / p.Xr * vdr - (p.ws - wr) * x[Ed];
  r[1] = -(x[Ed] - (p.Xs - xsp) * iqs) / t0 - p.ws * p.Xm / p.Xr * vqr + (p.ws - wr) * x[Eq];
  r[2] = p.ws / (2 * p.HD) * (tm - x[Ed] * ids - x[Eq] * iqs);
  r[3] = p.KI1 * (pref - pg);
  r[4] = p.KI2 * (p.KP1 * (pref - pg) + x[X1] - iqr);
  r[5] = p.KI3 * (qref - qg);
  r[6] = p.KI4 * (p.KP3 * (qref - qg) + x[X3] - idr);
  const double igc = (vqr * iqr + vdr * idr) / vd;
  double* g = r.data() + kWtgStates;
  g[0] = p.KP2 * (p.KP1 * (pref - pg) + x[X1] - iqr) + x[X2] - vqr;
  g[1] = p.KP4 * (p.KP3 * (qref - qg) + x[X3] - idr) + x[X4] - vdr;
  g[2] = -pg + x[Ed] * ids + x[Eq] * iqs - p.Rs * (ids * ids + iqs * iqs) - (vqr * iqr + vdr * idr);
  g[3] = -qg + x[Eq] * ids - x[Ed] * iqs - xsp * (ids * ids + iqs * iqs);
  g[4] = -idr + x[Eq] / p.Xm + p.Xm / p.Xr * ids;
  g[5] = -iqr - x[Ed] / p.Xm + p.Xm / p.Xr * iqs;
  g[6] = x[Eq] - (p.Rs * iqs + xsp * ids + vd);
  g[7] = -x[Ed] - (xsp * iqs - p.Rs * ids);
  g[8] = vd - (p.Xt * ids + p.v_grid * std::cos(p.th_grid - y[ThD]));
  g[9] = p.Xt * (iqs - igc) + p.v_grid * std::sin(p.th_grid - y[ThD]);
  return r;
}

/// Central-difference Jacobian of fun at v, step 1e-6·(1+|v_i|).
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& fun, const Vector& v, double rel = 1e-6) {
  Matrix j;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double h = rel * (1 + std::abs(v[i]));
    Vector vp = v, vm = v;
    vp[i] += h;
    vm[i] -= h;
    const Vector fp = fun(vp), fm = fun(vm);
    if (j.empty()) j = Matrix(fp.size(), v.size());
    for (std::size_t r = 0; r < fp.size(); ++r) j(r, i) = (fp[r] - fm[r]) / (2 * h);
  }
  return j;
}

struct WtgEquilibrium {
  Vector x;  // 7
  Vector y;  // 10
  double pitch = 0.0;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> trace;  // residual norm per Newton iteration
};

namespace detail {
inline Vector equilibrium_residual(const WtgParams& p, const Vector& z) {
  const std::span<const double> zs(z);
  Vector r = wtg_residual(p, zs.subspan(0, kWtgStates), zs.subspan(kWtgStates, kWtgAlg), 0.0, z.back());
  r.push_back(z[kWtgStates + wtg::Pg] - p.p_gen);
  return r;
}
}  // namespace detail

/// Flat-voltage starting point with rotor speed from Copt·ωr³ = P_gen.
inline Vector equilibrium_guess(const WtgParams& p) {
  Vector z(kWtgStates + kWtgAlg + 1, 0.0);
  z[wtg::Eq] = 1.0;
  z[wtg::Wr] = std::cbrt(p.p_gen / p.Copt);
  z[kWtgStates + wtg::Pg] = p.p_gen;
  z[kWtgStates + wtg::Iqs] = 0.3;
  z[kWtgStates + wtg::VD] = 1.0;
  z[kWtgStates + wtg::ThD] = 0.0;
  z.back() = 2.0;  // pitch, degrees
  return z;
}

/// Damped Newton on the 17 model equations plus P_g = P_gen, unknown pitch.
inline WtgEquilibrium find_equilibrium(const WtgParams& p, const Vector& guess = {}, double tol = 1e-9,
                                       int max_iter = 100) {
  p.validate();
  Vector z = guess.empty() ? equilibrium_guess(p) : guess;
  if (z.size() != kWtgStates + kWtgAlg + 1) throw Error(Errc::DimensionMismatch, "equilibrium guess length");
  auto fun = [&](const Vector& v) { return detail::equilibrium_residual(p, v); };
  auto safe_norm = [&](const Vector& v) {
    try {
      const Vector r = fun(v);
      double m = 0;
      for (double e : r) m = std::max(m, std::abs(e));
      return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  WtgEquilibrium eq;
  double res = safe_norm(z);
  if (!std::isfinite(res)) throw Error(Errc::DomainError, "equilibrium guess outside the model domain");
  eq.trace.push_back(res);
  int it = 0;
  for (; it < max_iter && res > tol; ++it) {
    const Matrix jac = fd_jacobian(fun, z);
    Vector step;
    try {
      step = Lu(jac).solve(fun(z));
    } catch (const Error&) {
      break;
    }
    double lam = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
      const Vector zn = axpy(-lam, step, z);
      const double rn = safe_norm(zn);
      if (rn < (1 - 1e-4 * lam) * res) {
        z = zn;
        res = rn;
        moved = true;
        break;
      }
    }
    eq.trace.push_back(res);
    if (!moved) break;
  }
  if (!(res <= tol))
    throw Error(Errc::NoConvergence, "WTG equilibrium did not converge, best residual " + std::to_string(res) +
                                         "; try a better initial guess");
  eq.x.assign(z.begin(), z.begin() + kWtgStates);
  eq.y.assign(z.begin() + kWtgStates, z.begin() + kWtgStates + kWtgAlg);
  eq.pitch = z.back();
  eq.iterations = it;
  eq.residual = res;
  return eq;
}

inline Vector equilibrium_vector(const WtgEquilibrium& eq) {
  Vector z = eq.x;
  z.insert(z.end(), eq.y.begin(), eq.y.end());
  z.push_back(eq.pitch);
  return z;
}

struct DaeBlocks {
  Matrix As, Bs, Cs, Ds;  // ∂f/∂x, ∂f/∂y, ∂g/∂x, ∂g/∂y
  Matrix Ms, Ns;          // ∂f/∂uw, ∂g/∂uw
  Matrix Es, Fs;          // output ΔP_gen = Es Δx + Fs Δy
  Matrix Sigma1, Sigma2;  // noise on f and g
};

inline DaeBlocks linearize(const WtgParams& p, const WtgEquilibrium& eq, double rel = 1e-6) {
  const Vector& x0 = eq.x;
  const Vector& y0 = eq.y;
  auto fx = [&](const Vector& x) { return wtg_residual(p, x, y0, 0.0, eq.pitch); };
  auto fy = [&](const Vector& y) { return wtg_residual(p, x0, y, 0.0, eq.pitch); };
  auto fu = [&](const Vector& u) { return wtg_residual(p, x0, y0, u[0], eq.pitch); };
  const Matrix jx = fd_jacobian(fx, x0, rel);
  const Matrix jy = fd_jacobian(fy, y0, rel);
  const Matrix ju = fd_jacobian(fu, Vector{0.0}, rel);
  std::vector<std::size_t> fr(kWtgStates), gr(kWtgAlg), xc(kWtgStates), yc(kWtgAlg);
  for (std::size_t i = 0; i < kWtgStates; ++i) fr[i] = xc[i] = i;
  for (std::size_t i = 0; i < kWtgAlg; ++i) {
    gr[i] = kWtgStates + i;
    yc[i] = i;
  }
  const std::vector<std::size_t> uc{0};
  DaeBlocks b;
  b.As = jx.select(fr, xc);
  b.Cs = jx.select(gr, xc);
  b.Bs = jy.select(fr, yc);
  b.Ds = jy.select(gr, yc);
  b.Ms = ju.select(fr, uc);
  b.Ns = ju.select(gr, uc);
  b.Es = Matrix(1, kWtgStates);
  b.Fs = Matrix(1, kWtgAlg);
  b.Fs(0, wtg::Pg) = 1.0;
  b.Sigma1 = Matrix(kWtgStates, 1);
  b.Sigma1(wtg::Wr, 0) = p.kw;
  b.Sigma2 = Matrix(kWtgAlg, 1);
  return b;
}

struct KronModel {
  Matrix A, B, C, D, Sigma, E;
};

inline KronModel kron_reduce(const DaeBlocks& b) {
  std::optional<Lu> lu;
  try {
    lu.emplace(b.Ds);
  } catch (const Error&) {
    throw Error(Errc::Singular, "algebraic Jacobian D_s is numerically singular");
  }
  const Matrix dc = lu->solve(b.Cs), dn = lu->solve(b.Ns), ds = lu->solve(b.Sigma2);
  KronModel k;
  k.A = b.As - b.Bs * dc;
  k.B = b.Ms - b.Bs * dn;
  k.C = b.Es - b.Fs * dc;
  k.D = (b.Fs * dn) * -1.0;
  k.Sigma = b.Sigma1 - b.Bs * ds;
  k.E = (b.Fs * ds) * -1.0;
  return k;
}

struct GridParams {
  double base_mva = 1000.0;
  double H = 4.0, D = 1.0, tau_ch = 0.3, tau_g = 0.1, R = 0.05;
  double ws = 2 * std::numbers::pi * 60.0;
  double dPd = 0.15;
  double switch_on = 5.0, switch_off = 8.75;
  double storage_ramp = 0.04;
  int wtg_count = 200;
  double wtg_mva = 1.0;
  double horizon = 10.0;
};

/// WTG per-unit quantity on the unit base expressed on the system base.
inline double wtg_to_system(double value_pu, const GridParams& g) {
  return value_pu * g.wtg_count * g.wtg_mva / g.base_mva;
}

namespace fourbus {
// 11-state ordering: 7 WTG states, then Δω, ΔP_s, ΔP_m, ΔP_v.
inline constexpr std::size_t kDw = 7, kPs = 8, kPm = 9, kPv = 10;
inline constexpr std::size_t kStates = 11;
}  // namespace fourbus

/// Two-mode switched frequency model with inputs [u^w, u^s] and schedule
/// [0, on], [on, off], [off, horizon].
inline std::pair<SwitchedLinearSystem, ModeSchedule> assemble_switched(const KronModel& k, const GridParams& g) {
  using namespace fourbus;
  const std::size_t nw = k.A.rows();
  if (nw != kWtgStates) throw Error(Errc::DimensionMismatch, "reduced WTG model must have 7 states");
  const double c = g.ws / (2 * g.H);
  const double share = wtg_to_system(1.0, g);
  Matrix a(kStates, kStates), b(kStates, 2), s(kStates, k.Sigma.cols());
  a.set_block(0, 0, k.A);
  for (std::size_t i = 0; i < nw; ++i) {
    b(i, 0) = k.B(i, 0);
    for (std::size_t j = 0; j < k.Sigma.cols(); ++j) s(i, j) = k.Sigma(i, j);
  }
  for (std::size_t j = 0; j < nw; ++j) a(kDw, j) = c * share * k.C(0, j);
  b(kDw, 0) = c * share * k.D(0, 0);
  b(kDw, 1) = c;
  for (std::size_t j = 0; j < k.Sigma.cols(); ++j) s(kDw, j) = c * share * k.E(0, j);
  a(kDw, kDw) = -c * g.D / g.ws;
  a(kDw, kPs) = c;
  a(kDw, kPm) = c;
  a(kPm, kPm) = -1 / g.tau_ch;
  a(kPm, kPv) = 1 / g.tau_ch;
  a(kPv, kPv) = -1 / g.tau_g;
  a(kPv, kDw) = -1 / (g.tau_g * g.ws * g.R);
  Vector d1(kStates, 0.0);
  d1[kDw] = -c * g.dPd;
  Vector d2 = d1;
  d2[kPs] = g.storage_ramp;
  SwitchedLinearSystem sys;
  sys.modes = {{"SG1", a, b, s, d1}, {"SG2", a, b, s, d2}};
  sys.edges = {{0, 1}, {1, 0}};
  sys.min_dwell = 0.1;
  sys.state_names = {"Eq", "Ed", "wr", "x1", "x2", "x3", "x4", "dw", "dPs", "dPm", "dPv"};
  sys.input_names = {"uw", "us"};
  ModeSchedule sched;
  sched.segments = {{0, g.switch_on}};
  if (g.horizon > g.switch_on) sched.segments.push_back({1, std::min(g.switch_off, g.horizon) - g.switch_on});
  if (g.horizon > g.switch_off) sched.segments.push_back({0, g.horizon - g.switch_off});
  sys.validate();
  return {sys, sched};
}

struct WtgPipeline {
  WtgEquilibrium eq;
  DaeBlocks blocks;
  KronModel kron;
};

inline WtgPipeline build_wtg(const WtgParams& p) {
  WtgPipeline out;
  out.eq = find_equilibrium(p);
  out.blocks = linearize(p, out.eq);
  out.kron = kron_reduce(out.blocks);
  return out;
}

/// ΔP_gen response of the nonlinear DAE to uw(t) from equilibrium, by RK4 with
/// the algebraic variables solved by Newton at every stage.
inline Vector simulate_dae_pgen(const WtgParams& p, const WtgEquilibrium& eq, const std::function<double(double)>& uw,
                                double dt, std::size_t steps) {
  Vector x = eq.x, y = eq.y;
  auto solve_alg = [&](const Vector& xs, double u) {
    auto g = [&](const Vector& yy) {
      const Vector r = wtg_residual(p, xs, yy, u, eq.pitch);
      return Vector(r.begin() + kWtgStates, r.end());
    };
    for (int it = 0; it < 20; ++it) {
      const Vector r = g(y);
      double m = 0;
      for (double e : r) m = std::max(m, std::abs(e));
      if (m < 1e-13) break;
      y = axpy(-1.0, Lu(fd_jacobian(g, y)).solve(r), y);
    }
    return y;
  };
  auto f = [&](const Vector& xs, double u) {
    const Vector yy = solve_alg(xs, u);
    const Vector r = wtg_residual(p, xs, yy, u, eq.pitch);
    return Vector(r.begin(), r.begin() + kWtgStates);
  };
  Vector out;
  out.reserve(steps + 1);
  out.push_back(solve_alg(x, uw(0.0))[wtg::Pg] - eq.y[wtg::Pg]);
  for (std::size_t j = 0; j < steps; ++j) {
    const double t = static_cast<double>(j) * dt;
    const double u = uw(t);  // zero-order hold
    const Vector k1 = f(x, u);
    const Vector k2 = f(axpy(dt / 2, k1, x), u);
    const Vector k3 = f(axpy(dt / 2, k2, x), u);
    const Vector k4 = f(axpy(dt, k3, x), u);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    out.push_back(solve_alg(x, u)[wtg::Pg] - eq.y[wtg::Pg]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Network

struct Branch {
  int from = 0, to = 0;  // 1-based bus numbers
  double x = 0.0;        // series reactance, pu
  double charging = 0.0;
  bool monitored = true;  // transformers are not
};

struct NetworkData {
  int buses = 0;
  int slack = 1;
  std::vector<Branch> branches;
  Vector base_injection;  // per bus (index bus-1), pu, generation positive
};

inline std::string line_name(const Branch& b) { return "P" + std::to_string(b.from) + std::to_string(b.to); }

/// DC sensitivities: rows = monitored branches, cols = buses; the slack bus
/// column is zero (it absorbs every mismatch).
inline Matrix dc_flow_sensitivity(const NetworkData& net) {
  const auto nb = static_cast<std::size_t>(net.buses);
  // Connectivity.
  std::vector<int> comp(nb, -1);
  std::vector<std::size_t> stack{static_cast<std::size_t>(net.slack - 1)};
  comp[stack.back()] = 0;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (const auto& br : net.branches) {
      const auto a = static_cast<std::size_t>(br.from - 1), b = static_cast<std::size_t>(br.to - 1);
      if (br.x == 0.0) continue;
      for (auto [s, t] : {std::pair{a, b}, std::pair{b, a}})
        if (s == v && comp[t] < 0) {
          comp[t] = 0;
          stack.push_back(t);
        }
    }
  }
  for (std::size_t i = 0; i < nb; ++i)
    if (comp[i] < 0) throw Error(Errc::IslandedNetwork, "bus " + std::to_string(i + 1) + " is not connected to the slack");
  Matrix bm(nb, nb);
  for (const auto& br : net.branches) {
    const auto a = static_cast<std::size_t>(br.from - 1), b = static_cast<std::size_t>(br.to - 1);
    const double s = 1 / br.x;
    bm(a, a) += s;
    bm(b, b) += s;
    bm(a, b) -= s;
    bm(b, a) -= s;
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < nb; ++i)
    if (static_cast<int>(i) != net.slack - 1) keep.push_back(i);
  const Matrix binv = inverse(bm.select(keep, keep));
  // θ = X P with the slack angle fixed at zero.
  Matrix theta(nb, nb);
  for (std::size_t r = 0; r < keep.size(); ++r)
    for (std::size_t c = 0; c < keep.size(); ++c) theta(keep[r], keep[c]) = binv(r, c);
  std::vector<const Branch*> mon;
  for (const auto& br : net.branches)
    if (br.monitored) mon.push_back(&br);
  Matrix out(mon.size(), nb);
  for (std::size_t l = 0; l < mon.size(); ++l) {
    const auto a = static_cast<std::size_t>(mon[l]->from - 1), b = static_cast<std::size_t>(mon[l]->to - 1);
    for (std::size_t c = 0; c < nb; ++c) out(l, c) = (theta(a, c) - theta(b, c)) / mon[l]->x;
  }
  return out;
}

/// Injection deviation at each bus as an affine function of (x, u).
struct BusInjection {
  int bus = 1;
  Vector state_row;
  Vector input_row;
  double constant = 0.0;
};

struct LineFlow {
  std::string name;
  Vector a;  // state row, unnormalized
  Vector c;  // input row
  double bias = 0.0;  // base flow plus constant injections
};

inline std::vector<LineFlow> line_flow_outputs(const NetworkData& net, const std::vector<BusInjection>& inj,
                                               std::size_t n, std::size_t p) {
  const Matrix s = dc_flow_sensitivity(net);
  std::vector<LineFlow> out;
  std::size_t l = 0;
  for (const auto& br : net.branches) {
    if (!br.monitored) continue;
    LineFlow f;
    f.name = line_name(br);
    f.a.assign(n, 0.0);
    f.c.assign(p, 0.0);
    for (std::size_t bus = 0; bus < static_cast<std::size_t>(net.buses); ++bus)
      f.bias += s(l, bus) * (net.base_injection.empty() ? 0.0 : net.base_injection[bus]);
    for (const auto& in : inj) {
      const double w = s(l, static_cast<std::size_t>(in.bus - 1));
      for (std::size_t i = 0; i < in.state_row.size(); ++i) f.a[i] += w * in.state_row[i];
      for (std::size_t i = 0; i < in.input_row.size(); ++i) f.c[i] += w * in.input_row[i];
      f.bias += w * in.constant;
    }
    out.push_back(std::move(f));
    ++l;
  }
  return out;
}

namespace ninebus {

// G1 behind its transformer at bus 1, the wind farm and its storage behind
// the second transformer at bus 3 (connected to bus 7).
inline NetworkData network(const GridParams& g) {
  NetworkData net;
  net.buses = 9;
  net.slack = 1;
  net.branches = {{2, 8, 0.01, 0.0006625}, {2, 9, 0.01, 0.0006625}, {7, 8, 0.04, 0.0023}, {7, 9, 0.04, 0.0023},
                  {4, 8, 0.03, 0.0031},    {4, 9, 0.03, 0.0031},    {4, 5, 0.03, 0.0034}, {5, 6, 0.03, 0.0094},
                  {6, 7, 0.02, 0.0258},    {1, 2, 1.8868, 0.0, false}, {3, 7, 0.618, 0.0, false}};
  net.base_injection.assign(9, 0.0);
  net.base_injection[3 - 1] = wtg_to_system(1.5, g);
  net.base_injection[4 - 1] = -0.4;
  net.base_injection[9 - 1] = -0.1;
  net.base_injection[5 - 1] = -0.05;
  net.base_injection[6 - 1] = -0.05;
  return net;
}

inline constexpr int kDisturbanceBus = 4;
inline constexpr int kWindBus = 3;

/// Injection deviations of the four-bus state model mapped onto the network.
inline std::vector<BusInjection> injections(const KronModel& k, const GridParams& g) {
  using namespace fourbus;
  const double share = wtg_to_system(1.0, g);
  BusInjection wind{kWindBus, Vector(kStates, 0.0), Vector(2, 0.0), 0.0};
  for (std::size_t j = 0; j < kWtgStates; ++j) wind.state_row[j] = share * k.C(0, j);
  wind.state_row[kPs] = 1.0;
  wind.input_row[0] = share * k.D(0, 0);
  wind.input_row[1] = 1.0;
  BusInjection load{kDisturbanceBus, Vector(kStates, 0.0), Vector(2, 0.0), -g.dPd};
  return {wind, load};
}

}  // namespace ninebus

}  // namespace certsynth
