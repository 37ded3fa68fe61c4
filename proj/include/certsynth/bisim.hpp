#pragma once

// Quadratic stochastic bisimulation certificates φ = eᵀ M e · e^{μt} for
// switched linear systems, their tightening scalars z and the predicate
// offsets δ̂ = (√r + √γ̂)/z.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "certsynth/error.hpp"
#include "certsynth/mtl.hpp"
#include "certsynth/numkernel.hpp"
#include "certsynth/sysmodel.hpp"

namespace certsynth {

struct ModeCertificate {
  Matrix M;  // on the certified coordinates
  double mu = 0.0;
  double alpha = 0.0;
};

struct BisimCertificate {
  std::vector<std::size_t> coords;    // certified state coordinates
  std::vector<ModeCertificate> modes;  // indexed by system mode
  double epsilon = 0.05;
  double t_end = 0.0;
  double gamma_hat = 0.0;
  double zeta = 0.0;
  std::string method;
  // Per schedule segment of the certified horizon.
  std::vector<int> segment_mode;
  Vector segment_start;
  Vector segment_dwell;
  Vector segment_r;

  const ModeCertificate& mode(int q) const {
    if (q < 0 || static_cast<std::size_t>(q) >= modes.size()) throw Error(Errc::MissingZ, "no certificate for mode");
    return modes[static_cast<std::size_t>(q)];
  }
  Vector project(std::span<const double> v) const {
    Vector out(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) out[i] = v[coords[i]];
    return out;
  }
  std::size_t segment_at(double t) const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < segment_start.size(); ++i)
      if (t >= segment_start[i] - 1e-9) s = i;
    return s;
  }
  /// Radius r̂ of the shrinking initial-state ball at absolute time t.
  double ball_radius(double t) const {
    const std::size_t i = segment_at(t);
    return segment_r[i] * std::exp(-modes.at(static_cast<std::size_t>(segment_mode[i])).mu * (t - segment_start[i]));
  }
  /// ‖e‖²_M with the metric of the segment active at t.
  double dist2(std::span<const double> e_full, double t) const {
    const std::size_t i = segment_at(t);
    return quad_form(mode(segment_mode[i]).M, project(e_full));
  }
};

/// M = lyap(A, Q, μ), α = tr(ΣᵀMΣ), both verified.
inline ModeCertificate certify_mode(const Matrix& a, const Matrix& sigma, double mu, const Matrix& q) {
  ModeCertificate c;
  c.mu = mu;
  c.M = lyapunov_solve(a, q, mu);
  c.alpha = (sigma.transpose() * c.M * sigma).trace();
  const Matrix lmi = symmetrize(a.transpose() * c.M + c.M * a + c.M * mu);
  if (!is_pd(c.M, 0.0) || !(max_eigenvalue(lmi) < 0.0))
    throw Error(Errc::CertificateCheckFailed, "Lyapunov solution fails the certificate conditions");
  return c;
}

/// Largest z with z² a aᵀ ⪯ M.
inline double max_z(const Matrix& m, std::span<const double> a) {
  if (norm2(a) == 0.0) return kInf;
  Vector y;
  try {
    y = Lu(m).solve(a);
  } catch (const Error&) {
    throw Error(Errc::Singular, "certificate matrix is singular");
  }
  const double q = dot(a, y);
  if (!(q > 0)) throw Error(Errc::Singular, "certificate matrix is not positive definite");
  return 1.0 / std::sqrt(q);
}

inline double prob_bound(const ModeCertificate& c, double horizon, double gamma) {
  if (!(gamma > 0) || !(horizon > 0)) throw Error(Errc::Precondition, "prob_bound needs gamma, T > 0");
  return std::max(0.0, 1.0 - c.alpha * horizon / gamma);
}

/// Largest generalized eigenvalue of (B, A): max xᵀBx / xᵀAx, A ≻ 0.
inline double generalized_max_eig(const Matrix& b, const Matrix& a) {
  const SymEig ea = sym_eig(a);
  const std::size_t n = a.rows();
  Matrix w(n, n);  // A^{-1/2}
  for (std::size_t k = 0; k < n; ++k) {
    if (ea.eigenvalues[k] <= 0) throw Error(Errc::Singular, "metric is not positive definite");
    const double s = 1.0 / std::sqrt(ea.eigenvalues[k]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w(i, j) += s * ea.eigenvectors(i, k) * ea.eigenvectors(j, k);
  }
  return max_eigenvalue(symmetrize(w * b * w));
}

struct ContainmentReport {
  bool ok = true;
  Vector margins;  // one per switch: r_i/ρ₁ − λ_max
};

/// Checks {eᵀM_{i−1}e ≤ r_{i−1}e^{−μT}} ⊆ {eᵀM_i e ≤ r_i} at every switch.
inline ContainmentReport containment_chain_check(const BisimCertificate& cert) {
  ContainmentReport rep;
  for (std::size_t i = 1; i < cert.segment_mode.size(); ++i) {
    const auto& prev = cert.mode(cert.segment_mode[i - 1]);
    const auto& cur = cert.mode(cert.segment_mode[i]);
    const double rho1 = cert.segment_r[i - 1] * std::exp(-prev.mu * cert.segment_dwell[i - 1]);
    const double lam = generalized_max_eig(cur.M, prev.M);
    const double margin = rho1 > 0 ? cert.segment_r[i] / rho1 - lam : kInf;
    rep.margins.push_back(margin);
    if (margin < -1e-9 * std::max(1.0, lam)) rep.ok = false;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Certificate shape optimization

struct CertOptions {
  double mu = 0.1;
  double epsilon = 0.05;
  double t_end = 5.0;
  double r_factor = 4.0;             // r_{q⁰} = r_factor·γ̂ unless r0 is set
  std::optional<double> r0;
  std::optional<std::size_t> shape_index;  // full-state coordinate for the M(s,s) <= ζ normalization
  double zeta = 0.0;                 // 0: no rescaling
  std::vector<Vector> normals;       // full-state unit normals to tighten
  Vector bands;                      // allowed half-width per normal
  std::string method = "full";      // "full" or "diag"
  std::vector<std::size_t> coords;   // certified coordinates; empty: auto
  int max_iter = 200;
};

/// Coordinates whose A and Σ rows vanish in every mode carry no error and are
/// excluded from the certificate.
inline std::vector<std::size_t> certified_coords(const SwitchedLinearSystem& sys) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sys.n(); ++i) {
    bool frozen = true;
    for (const auto& md : sys.modes) {
      for (std::size_t j = 0; j < sys.n() && frozen; ++j)
        if (md.A(i, j) != 0.0) frozen = false;
      for (std::size_t j = 0; j < sys.m() && frozen; ++j)
        if (md.Sigma(i, j) != 0.0) frozen = false;
    }
    if (!frozen) out.push_back(i);
  }
  return out;
}

namespace detail {

// Scale-free objective: smoothed min over normals of log(z_k² band_k²) minus
// log of the α normalization tr(N M).
class ShapeObjective {
 public:
  ShapeObjective(const LyapunovSolver& lyap, std::vector<Vector> normals, Vector bands, Matrix norm)
      : lyap_(lyap), normals_(std::move(normals)), bands_(std::move(bands)), norm_(std::move(norm)) {}

  double hard(const Matrix& m) const {
    double best = kInf;
    for (std::size_t k = 0; k < normals_.size(); ++k) best = std::min(best, h(m, k));
    return best - std::log((norm_ * m).trace());
  }

  // Returns f and fills grad with df/dL (lower triangle, row-major packing).
  double eval(const Vector& l, double kappa, Vector* grad) const {
    const std::size_t n = lyap_.dim();
    const Matrix lm = unpack(l, n);
    Matrix q = lm * lm.transpose();
    const double fro2 = dot(l, l);
    for (std::size_t i = 0; i < n; ++i) q(i, i) += kRidge * fro2;
    Matrix m;
    try {
      m = lyap_.solve(q);
    } catch (const Error&) {
      return -kInf;
    }
    const std::size_t nk = normals_.size();
    Vector hv(nk);
    std::vector<Vector> ys(nk);
    Vector qs(nk);
    Lu lu(m);
    for (std::size_t k = 0; k < nk; ++k) {
      ys[k] = lu.solve(normals_[k]);
      qs[k] = dot(normals_[k], ys[k]);
      if (!(qs[k] > 0)) return -kInf;
      hv[k] = -std::log(qs[k]) + 2 * std::log(bands_[k]);
    }
    const double hmin = *std::min_element(hv.begin(), hv.end());
    Vector w(nk);
    double sw = 0;
    for (std::size_t k = 0; k < nk; ++k) sw += w[k] = std::exp(-kappa * (hv[k] - hmin));
    const double tnm = (norm_ * m).trace();
    if (!(tnm > 0)) return -kInf;
    const double f = hmin - std::log(sw) / kappa - std::log(tnm);
    if (grad) {
      Matrix wm(n, n);
      for (std::size_t k = 0; k < nk; ++k) {
        const double c = w[k] / sw / qs[k];
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) wm(i, j) += c * ys[k][i] * ys[k][j];
      }
      wm -= norm_ * (1.0 / tnm);
      const Matrix p = symmetrize(lyap_.solve_adjoint(symmetrize(wm)));
      Matrix gl = p * lm * 2.0;
      const double tp = p.trace();
      grad->assign(l.size(), 0.0);
      std::size_t idx = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j, ++idx) (*grad)[idx] = gl(i, j) + 2 * kRidge * tp * l[idx];
    }
    return f;
  }

  Matrix metric(const Vector& l) const {
    const std::size_t n = lyap_.dim();
    const Matrix lm = unpack(l, n);
    Matrix q = lm * lm.transpose();
    const double fro2 = dot(l, l);
    for (std::size_t i = 0; i < n; ++i) q(i, i) += kRidge * fro2;
    return q;
  }

  static Matrix unpack(const Vector& l, std::size_t n) {
    Matrix lm(n, n);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) lm(i, j) = l[idx++];
    return lm;
  }
  static Vector pack_diag(const Vector& d) {
    const std::size_t n = d.size();
    Vector l(n * (n + 1) / 2, 0.0);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j, ++idx)
        if (i == j) l[idx] = d[i];
    return l;
  }

 private:
  double h(const Matrix& m, std::size_t k) const {
    return 2 * std::log(max_z(m, normals_[k])) + 2 * std::log(bands_[k]);
  }

  static constexpr double kRidge = 1e-10;
  const LyapunovSolver& lyap_;
  std::vector<Vector> normals_;
  Vector bands_;
  Matrix norm_;
};

// Multiplicative coordinate search over diagonal weightings, maximizing the
// objective of the first normal only.
inline Vector diag_search(const LyapunovSolver& lyap, const ShapeObjective& first_only, int max_iter) {
  const std::size_t n = lyap.dim();
  Vector w(n, 1.0);
  auto value = [&](const Vector& wv) {
    Vector d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = std::sqrt(wv[i]);
    return first_only.eval(ShapeObjective::pack_diag(d), 1e6, nullptr);
  };
  double best = value(w);
  for (int it = 0; it < max_iter; ++it) {
    bool improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (double f : {2.0, 0.5}) {
        Vector w2 = w;
        w2[i] *= f;
        const double v = value(w2);
        if (v > best + 1e-12 * std::abs(best)) {
          w = w2;
          best = v;
          improved = true;
        }
      }
    }
    if (!improved) break;
  }
  return w;
}

// BFGS ascent with Armijo backtracking.
inline Vector bfgs_maximize(const ShapeObjective& obj, Vector x, double kappa, int max_iter) {
  const std::size_t d = x.size();
  Vector g;
  double f = obj.eval(x, kappa, &g);
  Matrix h = Matrix::identity(d);
  // Initial scaling: a unit step should move x by about 1% of its norm.
  const double gn = norm2(g);
  if (gn > 0) h *= 0.01 * norm2(x) / gn;
  for (int it = 0; it < max_iter; ++it) {
    Vector p = h * g;  // ascent direction
    double slope = dot(p, g);
    if (!(slope > 0)) {
      h = Matrix::identity(d) * (0.01 * norm2(x) / std::max(norm2(g), 1e-300));
      p = h * g;
      slope = dot(p, g);
      if (!(slope > 0)) break;
    }
    double step = 1.0;
    Vector xn, gnw;
    double fn = -kInf;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      xn = axpy(step, p, x);
      fn = obj.eval(xn, kappa, &gnw);
      if (std::isfinite(fn) && fn >= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Vector s = sub(xn, x);
    const Vector yv = sub(g, gnw);  // gradient of −f
    const double sy = dot(s, yv);
    const double df = fn - f;
    x = std::move(xn);
    g = std::move(gnw);
    f = fn;
    if (sy > 1e-12 * norm2(s) * norm2(yv)) {
      // Inverse-Hessian update for minimizing −f.
      const Vector hy = h * yv;
      const double yhy = dot(yv, hy);
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
          h(i, j) += (1 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
    }
    if (df < 1e-12 * std::max(1.0, std::abs(f)) && it > 20) break;
  }
  // Normalize scale (the objective is invariant under L → cL).
  const double nx = norm2(x);
  if (nx > 0)
    for (double& v : x) v /= nx;
  return x;
}

}  // namespace detail

/// Per-mode certificate shape optimization followed by the γ̂ / r bookkeeping
/// over the schedule restricted to [0, t_end].
inline BisimCertificate optimize_certificate(const SwitchedLinearSystem& sys, const ModeSchedule& sched,
                                             const CertOptions& opt) {
  sys.validate();
  if (!(opt.epsilon > 0 && opt.epsilon < 1)) throw Error(Errc::Precondition, "epsilon must lie in (0,1)");
  if (!(opt.t_end > 0)) throw Error(Errc::Precondition, "t_end must be positive");
  if (opt.normals.size() != opt.bands.size()) throw Error(Errc::DimensionMismatch, "normals and bands differ in count");
  if (opt.method != "full" && opt.method != "diag") throw Error(Errc::Config, "unknown certificate method '" + opt.method + "'");
  BisimCertificate cert;
  cert.epsilon = opt.epsilon;
  cert.t_end = opt.t_end;
  cert.zeta = opt.zeta;
  cert.method = opt.method;
  cert.coords = opt.coords.empty() ? certified_coords(sys) : opt.coords;
  const std::size_t nc = cert.coords.size();
  if (nc == 0) throw Error(Errc::InvalidSystem, "no certified coordinates");
  std::optional<std::size_t> shape_local;
  if (opt.shape_index) {
    for (std::size_t i = 0; i < nc; ++i)
      if (cert.coords[i] == *opt.shape_index) shape_local = i;
    if (!shape_local) throw Error(Errc::Config, "shape index is a frozen coordinate");
  }
  std::vector<Vector> normals;
  Vector bands;
  for (std::size_t k = 0; k < opt.normals.size(); ++k) {
    Vector a = cert.project(opt.normals[k]);
    if (norm2(a) == 0.0) continue;
    normals.push_back(std::move(a));
    bands.push_back(opt.bands[k]);
  }

  const std::vector<std::size_t> all(cert.coords);
  for (std::size_t q = 0; q < sys.modes.size(); ++q) {
    const auto& md = sys.modes[q];
    std::vector<std::size_t> sig_cols(sys.m());
    for (std::size_t j = 0; j < sys.m(); ++j) sig_cols[j] = j;
    const Matrix a = md.A.select(all, all);
    const Matrix sigma = md.Sigma.select(all, sig_cols);
    // Reuse an earlier mode's certificate when the certified dynamics coincide.
    bool reused = false;
    for (std::size_t p = 0; p < q; ++p) {
      const Matrix ap = sys.modes[p].A.select(all, all);
      const Matrix sp = sys.modes[p].Sigma.select(all, sig_cols);
      if (ap == a && sp == sigma) {
        cert.modes.push_back(cert.modes[p]);
        reused = true;
        break;
      }
    }
    if (reused) continue;
    const LyapunovSolver lyap(a, opt.mu);
    Matrix norm = sigma * sigma.transpose();
    if (norm.trace() == 0.0) {
      norm = Matrix(nc, nc);
      if (shape_local) norm(*shape_local, *shape_local) = 1.0;
      else norm = Matrix::identity(nc);
    }
    Matrix qw = Matrix::identity(nc);
    if (!normals.empty()) {
      const detail::ShapeObjective first(lyap, {normals.front()}, {bands.front()}, norm);
      const Vector w = detail::diag_search(lyap, first, opt.max_iter);
      Vector d(nc);
      double tw = 0;
      for (double v : w) tw += v;
      for (std::size_t i = 0; i < nc; ++i) d[i] = std::sqrt(w[i] / tw);
      Vector l = detail::ShapeObjective::pack_diag(d);
      const detail::ShapeObjective full(lyap, normals, bands, norm);
      if (opt.method == "full") {
        for (double kappa : {10.0, 100.0, 1000.0}) l = detail::bfgs_maximize(full, l, kappa, 1500);
        // Keep the diagonal start if the smooth search did not improve the true min.
        const Vector l0 = detail::ShapeObjective::pack_diag(d);
        if (full.hard(lyap.solve(full.metric(l))) < full.hard(lyap.solve(full.metric(l0)))) l = l0;
      }
      qw = full.metric(l);
    }
    // Directions no normal constrains can be shrunk towards a singular M;
    // blend in identity until both are reasonably conditioned. The test is
    // scale free so that ζ stays a pure scale.
    ModeCertificate mc;
    for (double eps : {0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1.0}) {
      Matrix qe = qw;
      const double s = eps * qw.trace() / static_cast<double>(nc);
      for (std::size_t i = 0; i < nc; ++i) qe(i, i) += s;
      mc = certify_mode(a, sigma, opt.mu, qe);
      // Scale so that M(s,s) = ζ, or to unit trace.
      const double scale = opt.zeta > 0 && shape_local ? opt.zeta / mc.M(*shape_local, *shape_local)
                                                      : static_cast<double>(nc) / mc.M.trace();
      mc.M *= scale;
      mc.alpha *= scale;
      const SymEig em = sym_eig(mc.M), eq = sym_eig(qe);
      if (em.eigenvalues.front() > 1e-9 * em.eigenvalues.back() && eq.eigenvalues.front() > 1e-9 * eq.eigenvalues.back())
        break;
    }
    cert.modes.push_back(std::move(mc));
  }

  // Segments of the certified horizon.
  const ModeSchedule cs = sched.truncated(opt.t_end);
  double t = 0;
  double amax = 0;
  for (const auto& s : cs.segments) {
    cert.segment_mode.push_back(s.mode);
    cert.segment_start.push_back(t);
    cert.segment_dwell.push_back(s.dwell);
    t += s.dwell;
    amax = std::max(amax, cert.mode(s.mode).alpha);
  }
  cert.gamma_hat = amax * opt.t_end / opt.epsilon;
  const double r0 = opt.r0 ? *opt.r0 : opt.r_factor * cert.gamma_hat;
  cert.segment_r.push_back(r0);
  for (std::size_t i = 1; i < cert.segment_mode.size(); ++i) {
    const auto& prev = cert.mode(cert.segment_mode[i - 1]);
    const auto& cur = cert.mode(cert.segment_mode[i]);
    const double rho1 = cert.segment_r[i - 1] * std::exp(-prev.mu * cert.segment_dwell[i - 1]);
    cert.segment_r.push_back(rho1 * generalized_max_eig(cur.M, prev.M));
  }
  return cert;
}

/// Checks every BisimCertificate invariant; returns a list of failures.
inline std::vector<std::string> check_certificate(const BisimCertificate& cert, const SwitchedLinearSystem& sys,
                                                  double tol = 1e-10) {
  std::vector<std::string> fails;
  std::vector<std::size_t> sig_cols(sys.m());
  for (std::size_t j = 0; j < sys.m(); ++j) sig_cols[j] = j;
  double amax = 0;
  for (std::size_t q = 0; q < cert.modes.size(); ++q) {
    const auto& mc = cert.modes[q];
    const Matrix a = sys.modes[q].A.select(cert.coords, cert.coords);
    const Matrix sigma = sys.modes[q].Sigma.select(cert.coords, sig_cols);
    const std::string tag = "mode " + std::to_string(q) + ": ";
    if (!is_pd(mc.M, tol)) fails.push_back(tag + "M not positive definite");
    const Matrix lmi = symmetrize(a.transpose() * mc.M + mc.M * a + mc.M * mc.mu);
    if (!(max_eigenvalue(lmi) < -tol)) fails.push_back(tag + "decay LMI not strictly satisfied");
    const double alpha = (sigma.transpose() * mc.M * sigma).trace();
    if (std::abs(alpha - mc.alpha) > tol * std::max(1.0, std::abs(alpha))) fails.push_back(tag + "alpha mismatch");
    if (mc.mu < 0) fails.push_back(tag + "negative mu");
  }
  for (int q : cert.segment_mode) amax = std::max(amax, cert.mode(q).alpha);
  const double gh = amax * cert.t_end / cert.epsilon;
  if (std::abs(gh - cert.gamma_hat) > tol * std::max(1.0, gh)) fails.push_back("gamma_hat mismatch");
  if (!containment_chain_check(cert).ok) fails.push_back("containment chain fails");
  return fails;
}

/// z and δ̂ for every (term k, atom ν, segment i) of a fragment formula.
struct OffsetTable {
  std::vector<std::vector<Vector>> z;
  std::vector<std::vector<Vector>> delta;
};

inline OffsetTable offset_table(const BisimCertificate& cert, const Formula& fragment) {
  const auto terms = fragment_terms(fragment);
  OffsetTable tab;
  const std::size_t segs = cert.segment_mode.size();
  if (segs == 0 || cert.segment_r.size() != segs) throw Error(Errc::MissingZ, "certificate has no segments");
  for (const auto& term : terms) {
    tab.z.emplace_back();
    tab.delta.emplace_back();
    for (const auto& p : term.preds) {
      Vector zs(segs), ds(segs);
      for (std::size_t i = 0; i < segs; ++i) {
        const Vector a = cert.project(p.a);
        zs[i] = max_z(cert.mode(cert.segment_mode[i]).M, a);
        ds[i] = std::isinf(zs[i]) ? 0.0 : (std::sqrt(cert.segment_r[i]) + std::sqrt(cert.gamma_hat)) / zs[i];
      }
      tab.z.back().push_back(std::move(zs));
      tab.delta.back().push_back(std::move(ds));
    }
  }
  return tab;
}

inline RobustModification delta_offsets(const BisimCertificate& cert, const Formula& fragment) {
  const OffsetTable tab = offset_table(cert, fragment);
  RobustModification mod;
  mod.delta = tab.delta;
  for (std::size_t i = 0; i < cert.segment_mode.size(); ++i) {
    mod.mu.push_back(cert.mode(cert.segment_mode[i]).mu);
    mod.segment_start.push_back(cert.segment_start[i]);
  }
  return mod;
}

namespace detail {
inline std::string lhs_text(const std::string& label) {
  const auto k = label.find_first_of("<>");
  return k == std::string::npos ? std::string() : label.substr(0, k);
}
}  // namespace detail

/// Unique normals (up to sign) of a fragment, used as default optimization
/// targets, each with the tightest band: the half-width of a two-sided
/// interval on the same left-hand side, otherwise |b|.
inline void fragment_normals(const Formula& fragment, std::vector<Vector>& normals, Vector& bands) {
  for (const auto& term : fragment_terms(fragment)) {
    const auto& ps = term.preds;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      double band = std::abs(ps[i].b);
      const std::string lhs = detail::lhs_text(ps[i].label);
      for (std::size_t j = 0; j < ps.size() && !lhs.empty(); ++j)
        if (j != i && dot(ps[i].a, ps[j].a) < -1 + 1e-9 && detail::lhs_text(ps[j].label) == lhs)
          band = std::abs(ps[i].b + ps[j].b) / 2;
      bool found = false;
      for (std::size_t k = 0; k < normals.size(); ++k)
        if (std::abs(std::abs(dot(normals[k], ps[i].a)) - 1.0) < 1e-9) {
          bands[k] = std::min(bands[k], band);
          found = true;
          break;
        }
      if (!found) {
        normals.push_back(ps[i].a);
        bands.push_back(band);
      }
    }
  }
}

}  // namespace certsynth
