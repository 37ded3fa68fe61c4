#pragma once

// Minimum-effort feedforward synthesis for a robust-modified fragment
// formula. States are eliminated by forward substitution; the sampled
// predicate rows are added lazily to a warm-started dual simplex.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "certsynth/error.hpp"
#include "certsynth/lp.hpp"
#include "certsynth/mtl.hpp"
#include "certsynth/numkernel.hpp"
#include "certsynth/sysmodel.hpp"

namespace certsynth {

struct SynthesisProblem {
  const SwitchedLinearSystem* sys = nullptr;
  ModeSchedule schedule;  // covers exactly the synthesis horizon
  Vector x0;
  Formula formula;  // robust-modified fragment
  double dt = 0.01;
  Vector weights;  // per input channel, 1-norm weights
  Vector bounds;   // optional |u_c| caps
  double margin = 0.0;
  std::vector<Disturbance> anticipated;  // known extra drift pulses
  std::vector<Vector> prefix;            // inputs fixed on the first steps
};

struct ActiveRow {
  std::string label;
  double t = 0.0;
  double dual = 0.0;
};

struct SynthesisResult {
  std::vector<Vector> u;  // one per step
  SignalTrace nominal;
  double robustness = 0.0;
  double objective = 0.0;
  std::vector<ActiveRow> active;
  std::size_t rows = 0;
  std::size_t lp_iterations = 0;
  std::size_t rounds = 0;
  std::vector<std::string> added;  // pool constraints, in the order added
};

namespace detail {

struct RowRef {
  std::size_t term, atom, sample;
};

class Encoder {
 public:
  explicit Encoder(const SynthesisProblem& prob) : prob_(prob) {
    if (!prob.sys) throw Error(Errc::Precondition, "synthesis problem without a system");
    const auto& sys = *prob.sys;
    prob.schedule.validate(sys);
    disc_ = discretize(sys, prob.schedule, prob.dt);
    steps_ = disc_.steps();
    if (prob.x0.size() != sys.n()) throw Error(Errc::DimensionMismatch, "x0 length");
    weights_ = prob.weights.empty() ? Vector(sys.p(), 1.0) : prob.weights;
    if (weights_.size() != sys.p()) throw Error(Errc::DimensionMismatch, "one weight per input channel");
    obj_ = norm1_objective(weights_, steps_, prob.dt, prob.bounds);
    if (prob.prefix.size() > steps_) throw Error(Errc::DimensionMismatch, "input prefix longer than the horizon");
    for (std::size_t j = 0; j < prob.prefix.size(); ++j) {
      if (prob.prefix[j].size() != sys.p()) throw Error(Errc::DimensionMismatch, "prefix input length");
      for (std::size_t ch = 0; ch < sys.p(); ++ch) {
        const double v = prob.prefix[j][ch];
        const std::size_t ip = obj_.layout.plus(j, ch), im = obj_.layout.minus(j, ch);
        obj_.lower[ip] = obj_.upper[ip] = std::max(v, 0.0);
        obj_.lower[im] = obj_.upper[im] = std::max(-v, 0.0);
      }
    }
    terms_ = fragment_terms(prob.formula);
    const double horizon = static_cast<double>(steps_) * prob.dt;
    for (const auto& t : terms_) {
      steps_in(t.tau, prob.dt);
      if (t.t_end > horizon + 1e-9) throw Error(Errc::Precondition, "formula horizon exceeds the schedule");
      for (const auto& p : t.preds)
        if (p.a.size() != sys.n() || (!p.c.empty() && p.c.size() != sys.p()))
          throw Error(Errc::DimensionMismatch, "predicate '" + p.label + "' dimension");
    }
    extra_.assign(steps_, Vector());
    for (std::size_t j = 0; j < steps_; ++j) {
      const double t = static_cast<double>(j) * prob.dt;
      Vector d(sys.n(), 0.0);
      bool any = false;
      for (const auto& ds : prob.anticipated) {
        if (ds.direction.size() != sys.n()) throw Error(Errc::DimensionMismatch, "disturbance direction length");
        if (t >= ds.t1 - 1e-9 && t < ds.t2 - 1e-9) {
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += ds.magnitude * ds.direction[i];
          any = true;
        }
      }
      if (!any) continue;
      Matrix col(sys.n(), 1);
      for (std::size_t i = 0; i < d.size(); ++i) col(i, 0) = d[i];
      extra_[j] = expm_with_input(sys.modes[static_cast<std::size_t>(disc_.step(j).mode)].A, col, prob.dt).bd.col(0);
    }
    free_ = propagate(std::vector<Vector>(steps_, Vector(sys.p(), 0.0)));
  }

  std::size_t steps() const { return steps_; }
  const Norm1Objective& objective() const { return obj_; }
  const std::vector<FragmentTerm>& terms() const { return terms_; }

  std::pair<std::size_t, std::size_t> window(const FragmentTerm& t) const {
    auto [lo, hi] = sample_window(t.tau, t.t_end, prob_.dt);
    return {lo, std::min(hi, steps_)};
  }

  std::vector<Vector> propagate(const std::vector<Vector>& u) const {
    std::vector<Vector> xs(steps_ + 1);
    xs[0] = prob_.x0;
    for (std::size_t j = 0; j < steps_; ++j) {
      const auto& s = disc_.step(j);
      Vector nx = s.ad * xs[j];
      const Vector bu = s.bd * u[j];
      for (std::size_t i = 0; i < nx.size(); ++i) nx[i] += bu[i] + s.cd[i];
      if (!extra_[j].empty())
        for (std::size_t i = 0; i < nx.size(); ++i) nx[i] += extra_[j][i];
      xs[j + 1] = std::move(nx);
    }
    return xs;
  }

  // Row over split variables and its right-hand side.
  std::pair<Vector, double> row(const RowRef& r) const {
    const auto& p = terms_[r.term].preds[r.atom];
    const std::size_t j = r.sample;
    const std::size_t pch = prob_.sys->p();
    Vector coef(obj_.layout.num_vars(), 0.0);
    auto put = [&](std::size_t step, std::size_t ch, double g) {
      coef[obj_.layout.plus(step, ch)] += g;
      coef[obj_.layout.minus(step, ch)] -= g;
    };
    Vector rv = p.a;
    for (std::size_t k = j; k-- > 0;) {
      const auto& s = disc_.step(k);
      for (std::size_t ch = 0; ch < pch; ++ch) {
        double g = 0;
        for (std::size_t i = 0; i < rv.size(); ++i) g += rv[i] * s.bd(i, ch);
        put(k, ch, g);
      }
      Vector nr(rv.size(), 0.0);
      for (std::size_t i = 0; i < rv.size(); ++i) {
        const double ri = rv[i];
        if (ri == 0.0) continue;
        const auto arow = s.ad.row(i);
        for (std::size_t c = 0; c < rv.size(); ++c) nr[c] += ri * arow[c];
      }
      rv = std::move(nr);
    }
    if (!p.c.empty())
      for (std::size_t ch = 0; ch < pch; ++ch) put(std::min(j, steps_ - 1), ch, p.c[ch]);
    const double t = static_cast<double>(j) * prob_.dt;
    const double rhs = p.bound_at(t) - prob_.margin - dot(p.a, free_[j]);
    return {std::move(coef), rhs};
  }

  // Margin of each atom at each sample of its window for the given inputs.
  double margin(const RowRef& r, const std::vector<Vector>& xs, const std::vector<Vector>& u) const {
    const auto& p = terms_[r.term].preds[r.atom];
    const double t = static_cast<double>(r.sample) * prob_.dt;
    return p.margin(xs[r.sample], u[std::min(r.sample, steps_ - 1)], t) - prob_.margin;
  }

  std::vector<Vector> inputs(const Vector& v) const {
    const std::size_t pch = prob_.sys->p();
    std::vector<Vector> u(steps_, Vector(pch, 0.0));
    for (std::size_t j = 0; j < steps_; ++j)
      for (std::size_t ch = 0; ch < pch; ++ch) u[j][ch] = v[obj_.layout.plus(j, ch)] - v[obj_.layout.minus(j, ch)];
    return u;
  }

 private:
  const SynthesisProblem& prob_;
  Discretization disc_;
  std::size_t steps_ = 0;
  Vector weights_;
  Norm1Objective obj_;
  std::vector<FragmentTerm> terms_;
  std::vector<Vector> extra_;
  std::vector<Vector> free_;
};

inline std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string describe(const FragmentTerm& t, const LinearPredicate& p) {
  return p.label.empty() ? "G[" + fmt_num(t.tau) + "," + fmt_num(t.t_end) + "] predicate" : p.label;
}

}  // namespace detail

/// Full LP with one row per (term, atom, window sample).
inline LinearProgram encode(const SynthesisProblem& prob) {
  const detail::Encoder enc(prob);
  LinearProgram lp;
  lp.c = enc.objective().cost;
  lp.lower = enc.objective().lower;
  lp.upper = enc.objective().upper;
  std::vector<Vector> rows;
  for (std::size_t k = 0; k < enc.terms().size(); ++k) {
    const auto [lo, hi] = enc.window(enc.terms()[k]);
    for (std::size_t v = 0; v < enc.terms()[k].preds.size(); ++v)
      for (std::size_t j = lo; j <= hi; ++j) {
        auto [coef, rhs] = enc.row({k, v, j});
        rows.push_back(std::move(coef));
        lp.h.push_back(rhs);
      }
  }
  lp.G = Matrix(rows.size(), lp.c.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < lp.c.size(); ++j) lp.G(i, j) = rows[i][j];
  return lp;
}

inline SynthesisResult synthesize(const SynthesisProblem& prob) {
  const detail::Encoder enc(prob);
  const auto& terms = enc.terms();
  DualSimplex lp(enc.objective().cost, enc.objective().lower, enc.objective().upper);
  std::vector<detail::RowRef> added;
  std::vector<std::vector<std::vector<bool>>> in_lp(terms.size());
  for (std::size_t k = 0; k < terms.size(); ++k)
    in_lp[k].assign(terms[k].preds.size(), std::vector<bool>(enc.steps() + 1, false));

  SynthesisResult res;
  std::vector<Vector> u(enc.steps(), Vector(prob.sys->p(), 0.0));
  LpResult sol;
  sol.x.assign(enc.objective().layout.num_vars(), 0.0);
  sol.objective = 0.0;
  const double tol = 1e-9;
  for (std::size_t round = 0;; ++round) {
    const auto xs = enc.propagate(u);
    // Most violated sample of each violated stretch, per atom.
    std::vector<std::pair<double, detail::RowRef>> worst_list;
    std::size_t fresh = 0;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const auto [lo, hi] = enc.window(terms[k]);
      for (std::size_t v = 0; v < terms[k].preds.size(); ++v) {
        double run_min = 0;
        std::size_t run_j = 0;
        bool in_run = false;
        auto flush = [&] {
          if (in_run) {
            worst_list.push_back({run_min, {k, v, run_j}});
            if (!in_lp[k][v][run_j]) {
              in_lp[k][v][run_j] = true;
              auto [coef, rhs] = enc.row({k, v, run_j});
              lp.add_row(coef, rhs);
              added.push_back({k, v, run_j});
              ++fresh;
            }
          }
          in_run = false;
        };
        for (std::size_t j = lo; j <= hi; ++j) {
          const double m = enc.margin({k, v, j}, xs, u);
          if (m < -tol) {
            if (!in_run || m < run_min) {
              run_min = m;
              run_j = j;
            }
            in_run = true;
          } else {
            flush();
          }
        }
        flush();
      }
    }
    if (worst_list.empty()) break;
    if (fresh == 0) throw Error(Errc::NumericalFailure, "LP solution violates rows it already contains");
    sol = lp.solve();
    res.lp_iterations += sol.iterations;
    ++res.rounds;
    if (sol.status != LpStatus::Optimal) {
      std::sort(worst_list.begin(), worst_list.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      std::string msg = "synthesis LP is " + std::string(to_string(sol.status)) + "; most violated at the relaxation:";
      for (std::size_t i = 0; i < std::min<std::size_t>(5, worst_list.size()); ++i) {
        const auto& r = worst_list[i].second;
        msg += " [" + detail::describe(terms[r.term], terms[r.term].preds[r.atom]) + " at t=" +
               detail::short_num(static_cast<double>(r.sample) * prob.dt) + " by " + detail::short_num(-worst_list[i].first) + "]";
      }
      throw Error(Errc::Infeasible, msg);
    }
    u = enc.inputs(sol.x);
  }
  res.u = u;
  res.objective = sol.objective;
  res.rows = added.size();
  for (std::size_t i = 0; i < added.size() && i < sol.row_duals.size(); ++i) {
    if (std::abs(sol.row_duals[i]) <= 1e-12) continue;
    const auto& r = added[i];
    res.active.push_back({detail::describe(terms[r.term], terms[r.term].preds[r.atom]),
                          static_cast<double>(r.sample) * prob.dt, sol.row_duals[i]});
  }
  res.nominal = integrate_nominal(*prob.sys, prob.schedule, prob.x0, res.u, prob.dt);
  if (!prob.anticipated.empty()) res.nominal.states = enc.propagate(res.u);
  res.robustness = robustness(prob.formula, res.nominal, 0.0);
  if (res.robustness < -1e-6)
    throw Error(Errc::NumericalFailure, "synthesized trace has robustness " + detail::short_num(res.robustness));
  return res;
}

/// Re-solves with every pool predicate violated by the previous nominal trace
/// added, until none is violated.
inline SynthesisResult synthesize_iterative(const SynthesisProblem& prob, const Formula& pool) {
  const auto pool_terms = pool ? fragment_terms(pool) : std::vector<FragmentTerm>{};
  struct Item {
    FragmentTerm term;
    bool added = false;
  };
  std::vector<Item> items;
  for (const auto& t : pool_terms)
    for (const auto& p : t.preds) items.push_back({{t.tau, t.t_end, {p}}, false});
  SynthesisProblem cur = prob;
  std::vector<std::string> log;
  for (std::size_t iter = 0; iter <= items.size(); ++iter) {
    SynthesisResult r = synthesize(cur);
    std::vector<Formula> extra;
    for (auto& it : items) {
      if (it.added) continue;
      const Formula g = formula_from_fragment({it.term});
      if (robustness(g, r.nominal, 0.0) < 0) {
        it.added = true;
        extra.push_back(g);
        log.push_back(std::to_string(iter + 1) + ":" + detail::describe(it.term, it.term.preds.front()));
      }
    }
    if (extra.empty()) {
      r.added = log;
      return r;
    }
    extra.insert(extra.begin(), cur.formula);
    cur.formula = mtl::conj_all(extra);
  }
  throw Error(Errc::NumericalFailure, "pool iteration did not terminate");
}

/// CSV of t, inputs, states and the margin of every predicate of `f`.
inline void write_trace_csv(std::ostream& os, const SignalTrace& tr, const Formula& f,
                            const std::vector<std::string>& state_names, const std::vector<std::string>& input_names) {
  std::vector<std::pair<double, LinearPredicate>> preds;
  if (f)
    for (const auto& t : fragment_terms(f))
      for (const auto& p : t.preds) preds.push_back({t.tau, p});
  os << "t";
  for (std::size_t i = 0; i < (tr.inputs.empty() ? 0 : tr.inputs[0].size()); ++i)
    os << "," << (i < input_names.size() ? input_names[i] : "u" + std::to_string(i));
  for (std::size_t i = 0; i < (tr.states.empty() ? 0 : tr.states[0].size()); ++i)
    os << "," << (i < state_names.size() ? state_names[i] : "x" + std::to_string(i));
  for (std::size_t k = 0; k < preds.size(); ++k) {
    std::string lab = preds[k].second.label.empty() ? "pred" + std::to_string(k) : preds[k].second.label;
    std::replace(lab.begin(), lab.end(), ',', ';');
    os << ",\"margin " << lab << "\"";
  }
  os << "\n";
  os.precision(10);
  for (std::size_t j = 0; j < tr.size(); ++j) {
    os << tr.times[j];
    for (double v : tr.inputs[j]) os << "," << v;
    for (double v : tr.states[j]) os << "," << v;
    for (const auto& [tau, p] : preds) os << "," << p.margin(tr.states[j], tr.inputs[j], tr.times[j]);
    os << "\n";
  }
}

}  // namespace certsynth
