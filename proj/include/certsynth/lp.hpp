#pragma once

// Dense bounded-variable dual simplex. Rows can be appended between solves and
// the previous basis is reused, which is how synthesis adds constraints lazily.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "certsynth/error.hpp"
#include "certsynth/numkernel.hpp"

namespace certsynth {

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline std::string_view to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
  }
  return "?";
}

/// min cᵀv  s.t.  G v <= h,  E v = f,  lower <= v <= upper.
/// Empty bound vectors mean free variables.
struct LinearProgram {
  Vector c;
  Matrix G;
  Vector h;
  Matrix E;
  Vector f;
  Vector lower;
  Vector upper;
};

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Vector x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  Vector row_duals;      // one per row in insertion order (G rows then E rows for solve_lp)
  Vector reduced_costs;  // one per structural variable
  std::size_t iterations = 0;
};

class DualSimplex {
 public:
  static constexpr double kBig = 1e7;

  DualSimplex(Vector c, Vector lower = {}, Vector upper = {}) : n_(c.size()), cost_(std::move(c)) {
    const double inf = std::numeric_limits<double>::infinity();
    if (lower.empty()) lower.assign(n_, -inf);
    if (upper.empty()) upper.assign(n_, inf);
    if (lower.size() != n_ || upper.size() != n_) throw Error(Errc::DimensionMismatch, "bound vectors");
    lo_ = std::move(lower);
    up_ = std::move(upper);
    for (std::size_t j = 0; j < n_; ++j) {
      if (!std::isfinite(cost_[j])) throw Error(Errc::Precondition, "non-finite cost");
      if (lo_[j] > up_[j]) throw Error(Errc::Precondition, "variable with lower > upper");
    }
    wlo_ = lo_;
    wup_ = up_;
    status_.assign(n_, Status::Lower);
    x_.assign(n_, 0.0);
    d_ = cost_;
    // Place each structural variable at a bound that is dual feasible for y = 0,
    // using an artificial box where the natural bound is missing.
    for (std::size_t j = 0; j < n_; ++j) {
      const bool flo = std::isfinite(lo_[j]), fup = std::isfinite(up_[j]);
      if (cost_[j] > 0 || (cost_[j] == 0 && flo)) {
        if (!flo) wlo_[j] = -kBig;
        status_[j] = Status::Lower;
        x_[j] = wlo_[j];
      } else if (cost_[j] < 0 || fup) {
        if (!fup) wup_[j] = kBig;
        status_[j] = Status::Upper;
        x_[j] = wup_[j];
      } else {
        status_[j] = Status::Free;
        x_[j] = 0.0;
      }
    }
  }

  std::size_t num_vars() const { return n_; }
  std::size_t num_rows() const { return rows_.size(); }

  /// Appends aᵀv <= rhs (or = rhs). Its slack enters the basis.
  std::size_t add_row(Vector a, double rhs, bool equality = false) {
    if (a.size() != n_) throw Error(Errc::DimensionMismatch, "row length");
    for (double v : a)
      if (!std::isfinite(v)) throw Error(Errc::Precondition, "non-finite row entry");
    if (!std::isfinite(rhs)) throw Error(Errc::Precondition, "non-finite rhs");
    const std::size_t m = rows_.size();
    // Extended inverse: [[Binv, 0], [-a_B Binv, 1]].
    Vector aB(m);
    for (std::size_t r = 0; r < m; ++r) aB[r] = column_entry(head_[r], a, m);
    Matrix nb(m + 1, m + 1);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < m; ++k) nb(i, k) = binv_(i, k);
    for (std::size_t k = 0; k < m; ++k) {
      double s = 0;
      for (std::size_t r = 0; r < m; ++r) s += aB[r] * binv_(r, k);
      nb(m, k) = -s;
    }
    nb(m, m) = 1.0;
    binv_ = std::move(nb);
    rows_.push_back(std::move(a));
    rhs_.push_back(rhs);
    eq_.push_back(equality);
    const std::size_t slack = n_ + m;
    head_.push_back(slack);
    slack_status_.push_back(Status::Basic);
    slack_x_.push_back(0.0);
    // Slack basic in new row: cost 0 keeps the duals unchanged, and its value
    // is whatever the current point leaves of the rhs.
    const Vector& row = rows_.back();
    double val = rhs;
    for (std::size_t j = 0; j < n_; ++j)
      if (status_[j] != Status::Basic) val -= row[j] * x_[j];
    for (std::size_t r = 0; r < m; ++r) val -= aB[r] * xb_[r];
    xb_.push_back(val);
    if (ds_.size() < rows_.size()) ds_.resize(rows_.size(), 0.0);
    if (y_.size() < rows_.size()) y_.resize(rows_.size(), 0.0);
    return m;
  }

  LpResult solve() {
    LpResult res;
    const std::size_t max_iter = 50 * (n_ + rows_.size()) + 1000;
    std::size_t degenerate_run = 0;
    bool bland = false;
    recompute_primal();
    recompute_duals();
    std::size_t& since_refactor = since_refactor_;
    for (std::size_t it = 0;; ++it) {
      if (it > max_iter) throw Error(Errc::NumericalFailure, "dual simplex exceeded pivot limit");
      // Product-form updates cost O(m²), a fresh inverse O(m³).
      if (since_refactor >= std::max<std::size_t>(100, rows_.size())) {
        refactor();
        since_refactor = 0;
      }
      const std::size_t m = rows_.size();
      // Leaving row: largest bound violation (Dantzig) or smallest index (Bland).
      std::size_t r = m;
      double worst = 0.0;
      std::size_t best_var = std::numeric_limits<std::size_t>::max();
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t v = head_[i];
        const double val = xb_[i];
        const double lo = lower_of(v), up = upper_of(v);
        const double tol = 1e-9 * (1.0 + std::max(std::abs(lo == -kInfinity ? 0 : lo), std::abs(up == kInfinity ? 0 : up)));
        double viol = 0;
        if (val < lo - tol) viol = lo - val;
        else if (val > up + tol) viol = val - up;
        if (viol <= 0) continue;
        if (bland) {
          if (v < best_var) {
            best_var = v;
            r = i;
          }
        } else if (viol > worst) {
          worst = viol;
          r = i;
        }
      }
      if (r == m) {
        res.iterations = it;
        break;
      }
      const std::size_t leaving = head_[r];
      const bool to_lower = xb_[r] < lower_of(leaving);
      const double target = to_lower ? lower_of(leaving) : upper_of(leaving);

      // Pivot row over all nonbasic variables.
      const Vector rho = binv_.row(r).size() ? Vector(binv_.row(r).begin(), binv_.row(r).end()) : Vector{};
      Vector alpha_struct(n_, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const double ri = rho[i];
        if (ri == 0.0) continue;
        const Vector& row = rows_[i];
        for (std::size_t j = 0; j < n_; ++j) alpha_struct[j] += ri * row[j];
      }
      auto alpha_of = [&](std::size_t v) { return v < n_ ? alpha_struct[v] : rho[v - n_]; };

      // Ratio test. θ >= 0 when leaving to upper, θ <= 0 when leaving to lower.
      std::size_t enter = std::numeric_limits<std::size_t>::max();
      double best_ratio = kInfinity;
      double best_alpha = 0.0;
      const double sgn = to_lower ? -1.0 : 1.0;
      for (std::size_t v = 0; v < n_ + m; ++v) {
        const Status st = status_of(v);
        if (st == Status::Basic || st == Status::Fixed) continue;
        const double a = sgn * alpha_of(v);
        if (std::abs(a) <= 1e-9) continue;
        const double dv = reduced_cost(v);
        double ratio;
        if (st == Status::Free) {
          ratio = 0.0;
        } else if (st == Status::Lower) {
          if (a <= 0) continue;
          ratio = std::max(0.0, dv) / a;
        } else {
          if (a >= 0) continue;
          ratio = std::min(0.0, dv) / a;
        }
        const bool better = ratio < best_ratio - 1e-12 * (1 + best_ratio) ||
                            (ratio <= best_ratio + 1e-12 * (1 + best_ratio) &&
                             (bland ? v < enter : std::abs(a) > std::abs(best_alpha) * (1 + 1e-9)));
        if (better) {
          best_ratio = ratio;
          enter = v;
          best_alpha = a;
        }
      }
      if (enter == std::numeric_limits<std::size_t>::max()) {
        res.status = LpStatus::Infeasible;
        res.iterations = it;
        fill_result(res);
        res.status = LpStatus::Infeasible;
        return res;
      }
      if (best_ratio <= 1e-14) {
        if (++degenerate_run > 50) bland = true;
      } else {
        degenerate_run = 0;
      }

      // Dual update.
      const double theta = reduced_cost(enter) / alpha_of(enter);
      if (theta != 0.0) {
        for (std::size_t v = 0; v < n_ + m; ++v) {
          const Status st = status_of(v);
          if (st == Status::Basic) continue;
          set_reduced_cost(v, reduced_cost(v) - theta * alpha_of(v));
        }
      }
      set_reduced_cost(enter, 0.0);

      // Primal update along the entering column.
      const Vector col = binv_column(enter);
      const double piv = col[r];
      if (std::abs(piv) < 1e-11 || std::abs(piv - alpha_of(enter)) > 1e-6 * (1 + std::abs(piv))) {
        // Inconsistent pivot: rebuild the inverse and retry this iteration.
        refactor();
        since_refactor = 0;
        if (std::abs(piv) < 1e-11) bland = true;
        continue;
      }
      const double step = (xb_[r] - target) / piv;
      for (std::size_t i = 0; i < m; ++i) xb_[i] -= step * col[i];
      const double enter_val = value_of(enter) + step;

      // Leaving variable becomes nonbasic at its violated bound.
      set_status(leaving, to_lower ? Status::Lower : Status::Upper);
      set_value(leaving, target);
      set_reduced_cost(leaving, -theta);
      head_[r] = enter;
      set_status(enter, Status::Basic);
      xb_[r] = enter_val;

      // Inverse update.
      const double inv = 1.0 / piv;
      for (std::size_t k = 0; k < m; ++k) binv_(r, k) *= inv;
      for (std::size_t i = 0; i < m; ++i) {
        if (i == r || col[i] == 0.0) continue;
        const double f = col[i];
        for (std::size_t k = 0; k < m; ++k) binv_(i, k) -= f * binv_(r, k);
      }
      ++since_refactor;
    }
    recompute_primal();
    res.status = LpStatus::Optimal;
    fill_result(res);
    for (std::size_t j = 0; j < n_; ++j)
      if (std::abs(res.x[j]) >= 0.5 * kBig) res.status = LpStatus::Unbounded;
    return res;
  }

 private:
  enum class Status { Basic, Lower, Upper, Free, Fixed };
  static constexpr double kInfinity = std::numeric_limits<double>::infinity();

  double lower_of(std::size_t v) const {
    if (v < n_) return wlo_[v];
    return 0.0;
  }
  double upper_of(std::size_t v) const {
    if (v < n_) return wup_[v];
    return eq_[v - n_] ? 0.0 : kInfinity;
  }
  Status status_of(std::size_t v) const {
    if (v < n_) return status_[v];
    const Status s = slack_status_[v - n_];
    if (s != Status::Basic && eq_[v - n_]) return Status::Fixed;
    return s;
  }
  void set_status(std::size_t v, Status s) {
    if (v < n_) status_[v] = s;
    else slack_status_[v - n_] = s;
  }
  double value_of(std::size_t v) const { return v < n_ ? x_[v] : slack_x_[v - n_]; }
  void set_value(std::size_t v, double x) {
    if (v < n_) x_[v] = x;
    else slack_x_[v - n_] = x;
  }
  double reduced_cost(std::size_t v) const { return v < n_ ? d_[v] : (v - n_ < ds_.size() ? ds_[v - n_] : 0.0); }
  void set_reduced_cost(std::size_t v, double x) {
    if (v < n_) {
      d_[v] = x;
    } else {
      if (ds_.size() < rows_.size()) ds_.resize(rows_.size(), 0.0);
      ds_[v - n_] = x;
    }
  }
  // Entry of variable v's column in a row with coefficients a (row index `row`).
  double column_entry(std::size_t v, const Vector& a, std::size_t row) const {
    if (v < n_) return a[v];
    return v - n_ == row ? 1.0 : 0.0;
  }
  Vector column(std::size_t v) const {
    const std::size_t m = rows_.size();
    Vector col(m, 0.0);
    if (v < n_) {
      for (std::size_t i = 0; i < m; ++i) col[i] = rows_[i][v];
    } else {
      col[v - n_] = 1.0;
    }
    return col;
  }
  Vector binv_column(std::size_t v) const {
    const std::size_t m = rows_.size();
    Vector out(m, 0.0);
    if (v >= n_) {
      for (std::size_t i = 0; i < m; ++i) out[i] = binv_(i, v - n_);
      return out;
    }
    const Vector col = column(v);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0;
      for (std::size_t k = 0; k < m; ++k) s += binv_(i, k) * col[k];
      out[i] = s;
    }
    return out;
  }

  void recompute_primal() {
    const std::size_t m = rows_.size();
    Vector rhs(m);
    for (std::size_t i = 0; i < m; ++i) {
      double s = rhs_[i];
      const Vector& row = rows_[i];
      for (std::size_t j = 0; j < n_; ++j)
        if (status_[j] != Status::Basic) s -= row[j] * x_[j];
      if (slack_status_[i] != Status::Basic) s -= slack_x_[i];
      rhs[i] = s;
    }
    xb_ = binv_ * rhs;
  }

  void recompute_duals() {
    const std::size_t m = rows_.size();
    Vector cb(m);
    for (std::size_t r = 0; r < m; ++r) cb[r] = head_[r] < n_ ? cost_[head_[r]] : 0.0;
    y_.assign(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      double s = 0;
      for (std::size_t r = 0; r < m; ++r) s += cb[r] * binv_(r, k);
      y_[k] = s;
    }
    for (std::size_t j = 0; j < n_; ++j) {
      double s = cost_[j];
      for (std::size_t i = 0; i < m; ++i) s -= y_[i] * rows_[i][j];
      d_[j] = status_[j] == Status::Basic ? 0.0 : s;
    }
    ds_.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) ds_[i] = slack_status_[i] == Status::Basic ? 0.0 : -y_[i];
  }

  void refactor() {
    const std::size_t m = rows_.size();
    if (m == 0) return;
    Matrix b(m, m);
    for (std::size_t r = 0; r < m; ++r) {
      const Vector col = column(head_[r]);
      for (std::size_t i = 0; i < m; ++i) b(i, r) = col[i];
    }
    binv_ = inverse(b);
    recompute_primal();
    recompute_duals();
  }

  void fill_result(LpResult& res) {
    recompute_duals();
    res.x = x_;
    for (std::size_t r = 0; r < rows_.size(); ++r)
      if (head_[r] < n_) res.x[head_[r]] = xb_[r];
    res.objective = dot(cost_, res.x);
    res.row_duals = y_;
    res.reduced_costs.assign(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      double s = cost_[j];
      for (std::size_t i = 0; i < rows_.size(); ++i) s -= y_[i] * rows_[i][j];
      res.reduced_costs[j] = s;
    }
  }

  std::size_t n_;
  Vector cost_;
  Vector lo_, up_, wlo_, wup_;
  std::vector<Status> status_;
  Vector x_;
  Vector d_;
  std::vector<Vector> rows_;
  Vector rhs_;
  std::vector<bool> eq_;
  std::vector<std::size_t> head_;
  std::vector<Status> slack_status_;
  Vector slack_x_;
  Vector ds_;
  Vector xb_;
  Vector y_;
  Matrix binv_;
  std::size_t since_refactor_ = 0;
};

inline LpResult solve_lp(const LinearProgram& prog) {
  const std::size_t n = prog.c.size();
  if (prog.G.rows() != prog.h.size() || (prog.G.rows() > 0 && prog.G.cols() != n))
    throw Error(Errc::DimensionMismatch, "G/h shape");
  if (prog.E.rows() != prog.f.size() || (prog.E.rows() > 0 && prog.E.cols() != n))
    throw Error(Errc::DimensionMismatch, "E/f shape");
  DualSimplex lp(prog.c, prog.lower, prog.upper);
  for (std::size_t i = 0; i < prog.G.rows(); ++i) {
    auto r = prog.G.row(i);
    lp.add_row(Vector(r.begin(), r.end()), prog.h[i]);
  }
  for (std::size_t i = 0; i < prog.E.rows(); ++i) {
    auto r = prog.E.row(i);
    lp.add_row(Vector(r.begin(), r.end()), prog.f[i], true);
  }
  return lp.solve();
}

/// Split-variable encoding of Σ_c w_c Σ_j |u_c[j]| dt. Variables are laid out
/// as [u⁺(step 0, ch 0..p-1), ..., u⁻(...)] : index(j, ch, sign) below.
struct Norm1Layout {
  std::size_t steps = 0;
  std::size_t channels = 0;
  std::size_t num_vars() const { return 2 * steps * channels; }
  std::size_t plus(std::size_t j, std::size_t ch) const { return j * channels + ch; }
  std::size_t minus(std::size_t j, std::size_t ch) const { return steps * channels + j * channels + ch; }
};

struct Norm1Objective {
  Norm1Layout layout;
  Vector cost;   // per split variable
  Vector lower;  // zeros
  Vector upper;  // +inf, or the channel bound
  std::vector<std::size_t> unpenalized_channels;
};

/// `bounds` (optional) caps |u_c| per channel.
inline Norm1Objective norm1_objective(const Vector& weights, std::size_t steps, double dt, const Vector& bounds = {}) {
  Norm1Objective o;
  o.layout = {steps, weights.size()};
  const std::size_t nv = o.layout.num_vars();
  o.cost.assign(nv, 0.0);
  o.lower.assign(nv, 0.0);
  o.upper.assign(nv, std::numeric_limits<double>::infinity());
  for (std::size_t ch = 0; ch < weights.size(); ++ch) {
    if (weights[ch] < 0) throw Error(Errc::Precondition, "negative channel weight");
    if (weights[ch] == 0) o.unpenalized_channels.push_back(ch);
    for (std::size_t j = 0; j < steps; ++j) {
      o.cost[o.layout.plus(j, ch)] = weights[ch] * dt;
      o.cost[o.layout.minus(j, ch)] = weights[ch] * dt;
      if (!bounds.empty()) {
        o.upper[o.layout.plus(j, ch)] = bounds.at(ch);
        o.upper[o.layout.minus(j, ch)] = bounds.at(ch);
      }
    }
  }
  return o;
}

}  // namespace certsynth
