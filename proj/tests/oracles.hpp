#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "certsynth/lp.hpp"
#include "certsynth/mtl.hpp"
#include "certsynth/numkernel.hpp"
#include "certsynth/sysmodel.hpp"

namespace oracle {

using certsynth::Matrix;
using certsynth::Vector;

// Minimum of cᵀx over the vertices of {G x <= h, E x = f}. Each vertex is an
// n-subset of active rows (all equalities included) solved by Gaussian
// elimination. Returns nullopt when no vertex is feasible.
inline std::optional<double> lp_vertex_min(const Vector& c, const Matrix& g, const Vector& h, const Matrix& e,
                                           const Vector& f) {
  const std::size_t n = c.size();
  const std::size_t mi = g.rows(), me = e.rows();
  if (me > n) return std::nullopt;
  const std::size_t pick = n - me;
  std::vector<std::size_t> idx(pick);
  for (std::size_t k = 0; k < pick; ++k) idx[k] = k;
  std::optional<double> best;
  auto feasible = [&](const Vector& x) {
    for (std::size_t i = 0; i < mi; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < n; ++j) s += g(i, j) * x[j];
      if (s > h[i] + 1e-7 * (1 + std::abs(h[i]))) return false;
    }
    for (std::size_t i = 0; i < me; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < n; ++j) s += e(i, j) * x[j];
      if (std::abs(s - f[i]) > 1e-7 * (1 + std::abs(f[i]))) return false;
    }
    return true;
  };
  while (true) {
    if (pick <= mi) {
      // Gaussian elimination with partial pivoting on the active system.
      Matrix a(n, n + 1);
      for (std::size_t r = 0; r < pick; ++r) {
        for (std::size_t j = 0; j < n; ++j) a(r, j) = g(idx[r], j);
        a(r, n) = h[idx[r]];
      }
      for (std::size_t r = 0; r < me; ++r) {
        for (std::size_t j = 0; j < n; ++j) a(pick + r, j) = e(r, j);
        a(pick + r, n) = f[r];
      }
      bool singular = false;
      for (std::size_t col = 0; col < n && !singular; ++col) {
        std::size_t p = col;
        for (std::size_t r = col + 1; r < n; ++r)
          if (std::abs(a(r, col)) > std::abs(a(p, col))) p = r;
        if (std::abs(a(p, col)) < 1e-10) {
          singular = true;
          break;
        }
        for (std::size_t j = 0; j <= n; ++j) std::swap(a(col, j), a(p, j));
        for (std::size_t r = 0; r < n; ++r) {
          if (r == col) continue;
          const double fct = a(r, col) / a(col, col);
          for (std::size_t j = col; j <= n; ++j) a(r, j) -= fct * a(col, j);
        }
      }
      if (!singular) {
        Vector x(n);
        for (std::size_t j = 0; j < n; ++j) x[j] = a(j, n) / a(j, j);
        if (feasible(x)) {
          double v = 0;
          for (std::size_t j = 0; j < n; ++j) v += c[j] * x[j];
          if (!best || v < *best) best = v;
        }
      }
    }
    // Next combination.
    if (pick == 0 || pick > mi) break;
    std::size_t k = pick;
    while (k > 0 && idx[k - 1] == mi - pick + k - 1) --k;
    if (k == 0) break;
    ++idx[k - 1];
    for (std::size_t t = k; t < pick; ++t) idx[t] = idx[t - 1] + 1;
  }
  return best;
}

// Random feasible, bounded LP. Half of the instances use variable bounds, the
// other half free variables boxed in by explicit rows.
struct RandomLp {
  certsynth::LinearProgram prog;
  Matrix g_all;  // all inequality rows including the box, for the oracle
  Vector h_all;
};

inline RandomLp random_lp(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t meq, bool use_bounds) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.1, 1.0);
  RandomLp out;
  Vector x0(n);
  for (double& v : x0) v = 0.5 * nd(rng);
  auto& p = out.prog;
  p.c.resize(n);
  for (double& v : p.c) v = nd(rng);
  p.G = Matrix(m, n);
  p.h.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) {
      p.G(i, j) = nd(rng);
      s += p.G(i, j) * x0[j];
    }
    p.h[i] = s + ud(rng);
  }
  p.E = Matrix(meq, n);
  p.f.resize(meq);
  for (std::size_t i = 0; i < meq; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) {
      p.E(i, j) = nd(rng);
      s += p.E(i, j) * x0[j];
    }
    p.f[i] = s;
  }
  const double box = 3.0;
  const std::size_t rows = m + 2 * n;
  out.g_all = Matrix(rows, n);
  out.h_all.resize(rows);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.g_all(i, j) = p.G(i, j);
    out.h_all[i] = p.h[i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    out.g_all(m + 2 * j, j) = 1.0;
    out.h_all[m + 2 * j] = box;
    out.g_all(m + 2 * j + 1, j) = -1.0;
    out.h_all[m + 2 * j + 1] = box;
  }
  if (use_bounds) {
    p.lower.assign(n, -box);
    p.upper.assign(n, box);
  } else {
    p.G = out.g_all;
    p.h = out.h_all;
  }
  return out;
}

// Largest z with M − z² a aᵀ ⪰ 0, by bisection on the minimum eigenvalue.
inline double z_bisection(const Matrix& m, const Vector& a) {
  auto ok = [&](double z) {
    Matrix t = m;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a.size(); ++j) t(i, j) -= z * z * a[i] * a[j];
    return certsynth::min_eigenvalue(certsynth::symmetrize(t)) >= 0.0;
  };
  double lo = 0.0, hi = 1.0;
  while (ok(hi)) hi *= 2;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Robustness by direct recursion of the quantitative semantics at one sample.
inline double mtl_recursive(const certsynth::FormulaNode& f, const certsynth::SignalTrace& tr, std::size_t j) {
  using certsynth::kInf;
  using certsynth::Op;
  const double tj = tr.times[j];
  auto in_window = [&](std::size_t k) {
    const double t = tr.times[k];
    return t >= tj + f.lo - 1e-9 && t <= tj + f.hi + 1e-9;
  };
  switch (f.op) {
    case Op::True: return kInf;
    case Op::Pred: return f.pred.margin(tr.states[j], tr.inputs[j], tj);
    case Op::Not: return -mtl_recursive(*f.lhs, tr, j);
    case Op::And: return std::min(mtl_recursive(*f.lhs, tr, j), mtl_recursive(*f.rhs, tr, j));
    case Op::Or: return std::max(mtl_recursive(*f.lhs, tr, j), mtl_recursive(*f.rhs, tr, j));
    case Op::Always: {
      double v = kInf;
      for (std::size_t k = j; k < tr.size(); ++k)
        if (in_window(k)) v = std::min(v, mtl_recursive(*f.lhs, tr, k));
      return v;
    }
    case Op::Eventually: {
      double v = -kInf;
      for (std::size_t k = j; k < tr.size(); ++k)
        if (in_window(k)) v = std::max(v, mtl_recursive(*f.lhs, tr, k));
      return v;
    }
    case Op::Until: {
      double v = -kInf;
      for (std::size_t k = j; k < tr.size(); ++k) {
        if (!in_window(k)) continue;
        double m = mtl_recursive(*f.rhs, tr, k);
        for (std::size_t l = j; l < k; ++l) m = std::min(m, mtl_recursive(*f.lhs, tr, l));
        v = std::max(v, m);
      }
      return v;
    }
  }
  return 0;
}

inline certsynth::SignalTrace random_trace(std::mt19937_64& rng, std::size_t n, double dt, std::size_t dim = 2) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  certsynth::SignalTrace tr;
  tr.dt = dt;
  for (std::size_t j = 0; j < n; ++j) {
    tr.times.push_back(static_cast<double>(j) * dt);
    Vector x(dim);
    for (double& v : x) v = ud(rng);
    tr.states.push_back(x);
    tr.inputs.push_back({ud(rng)});
    tr.modes.push_back(0);
  }
  return tr;
}

// Random formula of the given depth over a 2-state, 1-input signal. Interval
// endpoints are multiples of dt up to max_steps.
inline certsynth::Formula random_formula(std::mt19937_64& rng, int depth, double dt, int max_steps = 10) {
  namespace mtl = certsynth::mtl;
  std::uniform_int_distribution<int> op(0, depth == 0 ? 0 : 7);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  std::uniform_int_distribution<int> steps(0, max_steps);
  auto interval = [&] {
    int a = steps(rng), b = steps(rng);
    if (a > b) std::swap(a, b);
    return std::pair<double, double>{a * dt, b * dt};
  };
  switch (op(rng)) {
    case 0:
    case 1: {
      certsynth::LinearPredicate p;
      p.a = {ud(rng), ud(rng)};
      const double na = certsynth::norm2(p.a);
      for (double& v : p.a) v /= na;
      p.c = {0.3 * ud(rng)};
      p.b = 0.5 * ud(rng);
      return mtl::pred(p);
    }
    case 2: return mtl::negate(random_formula(rng, depth - 1, dt, max_steps));
    case 3: return mtl::conj(random_formula(rng, depth - 1, dt, max_steps), random_formula(rng, depth - 1, dt, max_steps));
    case 4: return mtl::disj(random_formula(rng, depth - 1, dt, max_steps), random_formula(rng, depth - 1, dt, max_steps));
    case 5: {
      auto [lo, hi] = interval();
      return mtl::until(random_formula(rng, depth - 1, dt, max_steps), random_formula(rng, depth - 1, dt, max_steps), lo,
                        hi);
    }
    case 6: {
      auto [lo, hi] = interval();
      return mtl::always(random_formula(rng, depth - 1, dt, max_steps), lo, hi);
    }
    default: {
      auto [lo, hi] = interval();
      return mtl::eventually(random_formula(rng, depth - 1, dt, max_steps), lo, hi);
    }
  }
}

// Random symmetric positive definite n×n matrix with condition number <= ~1e3.
inline Matrix random_pd(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> nd;
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g(i, j) = nd(rng);
  Matrix m = g.transpose() * g;
  for (std::size_t i = 0; i < n; ++i) m(i, i) += 1e-2 * (1.0 + m.trace() / static_cast<double>(n));
  return certsynth::symmetrize(m);
}

// Damped oscillator driven on x₂, noise on x₂; one mode, one input.
inline certsynth::SwitchedLinearSystem toy_system(double noise = 0.3) {
  certsynth::SwitchedLinearSystem sys;
  sys.modes = {{"toy", Matrix{{-1.0, 1.0}, {-1.0, -1.5}}, Matrix{{0.0}, {1.0}}, Matrix{{0.0}, {noise}}, {}}};
  sys.min_dwell = 0.1;
  sys.state_names = {"x1", "x2"};
  sys.input_names = {"u"};
  return sys;
}

}  // namespace oracle
