#pragma once

// MTL formulas over sampled output trajectories: AST, text grammar, robust
// semantics, time domains and the offset-tightened ("robustified") fragment.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "certsynth/error.hpp"
#include "certsynth/numkernel.hpp"

namespace certsynth {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// One exponentially decaying piece of a bound offset, active for t >= start.
struct OffsetPiece {
  double start = 0.0;
  double delta = 0.0;
  double mu = 0.0;
};

/// aᵀx + cᵀu <= b − Δ(t)
struct LinearPredicate {
  Vector a;
  Vector c;
  double b = 0.0;
  std::string label;
  std::vector<OffsetPiece> offset;  // empty: Δ ≡ 0
  double unit = 1.0;                // |a| before normalization

  double offset_at(double t) const {
    const OffsetPiece* active = nullptr;
    for (const auto& p : offset)
      if (t >= p.start - 1e-9) active = &p;
    if (!active) return 0.0;
    return active->delta * std::exp(-active->mu * (t - active->start) / 2.0);
  }
  double bound_at(double t) const { return b - offset_at(t); }
  double margin(std::span<const double> x, std::span<const double> u, double t) const {
    double m = bound_at(t) - dot(a, x);
    if (!c.empty() && !u.empty()) m -= dot(c, u);
    return m;
  }
};

struct SignalTrace {
  double dt = 0.0;
  Vector times;
  std::vector<Vector> states;
  std::vector<Vector> inputs;
  std::vector<int> modes;

  std::size_t size() const noexcept { return times.size(); }
  double horizon() const { return times.empty() ? 0.0 : times.back() - times.front(); }

  void validate() const {
    if (times.empty()) throw Error(Errc::Precondition, "empty trace");
    if (states.size() != times.size() || inputs.size() != times.size() || modes.size() != times.size())
      throw Error(Errc::DimensionMismatch, "trace columns differ in length");
    for (std::size_t j = 1; j < times.size(); ++j)
      if (std::abs(times[j] - times[j - 1] - dt) > 1e-9) throw Error(Errc::Precondition, "trace is not uniformly sampled");
  }
  std::size_t index_of(double t) const {
    if (times.empty()) throw Error(Errc::Precondition, "empty trace");
    const double k = dt > 0 ? (t - times.front()) / dt : 0.0;
    const long j = std::lround(k);
    if (j < 0 || static_cast<std::size_t>(j) >= times.size() || std::abs(k - static_cast<double>(j)) > 1e-6)
      throw Error(Errc::OutOfDomain, "time " + std::to_string(t) + " is not a sample of the trace");
    return static_cast<std::size_t>(j);
  }
};

enum class Op { True, Pred, Not, And, Or, Until, Always, Eventually };

struct FormulaNode;
using Formula = std::shared_ptr<const FormulaNode>;

struct FormulaNode {
  Op op = Op::True;
  LinearPredicate pred;
  Formula lhs;  // unary operand / left operand
  Formula rhs;  // right operand
  double lo = 0.0, hi = 0.0;
};

namespace mtl {

inline Formula make_true() { return std::make_shared<FormulaNode>(FormulaNode{Op::True, {}, nullptr, nullptr, 0, 0}); }
inline Formula pred(LinearPredicate p) {
  return std::make_shared<FormulaNode>(FormulaNode{Op::Pred, std::move(p), nullptr, nullptr, 0, 0});
}
inline Formula negate(Formula f) { return std::make_shared<FormulaNode>(FormulaNode{Op::Not, {}, std::move(f), nullptr, 0, 0}); }
inline Formula conj(Formula a, Formula b) {
  return std::make_shared<FormulaNode>(FormulaNode{Op::And, {}, std::move(a), std::move(b), 0, 0});
}
inline Formula disj(Formula a, Formula b) {
  return std::make_shared<FormulaNode>(FormulaNode{Op::Or, {}, std::move(a), std::move(b), 0, 0});
}
inline void check_interval(double lo, double hi) {
  if (!(lo >= 0) || !(hi >= lo) || !std::isfinite(hi)) throw Error(Errc::SyntaxError, "interval must satisfy 0 <= lo <= hi < inf");
}
inline Formula until(Formula a, Formula b, double lo, double hi) {
  check_interval(lo, hi);
  return std::make_shared<FormulaNode>(FormulaNode{Op::Until, {}, std::move(a), std::move(b), lo, hi});
}
inline Formula always(Formula f, double lo, double hi) {
  check_interval(lo, hi);
  return std::make_shared<FormulaNode>(FormulaNode{Op::Always, {}, std::move(f), nullptr, lo, hi});
}
inline Formula eventually(Formula f, double lo, double hi) {
  check_interval(lo, hi);
  return std::make_shared<FormulaNode>(FormulaNode{Op::Eventually, {}, std::move(f), nullptr, lo, hi});
}
/// Left-folded conjunction; a single element is returned as is.
inline Formula conj_all(const std::vector<Formula>& parts) {
  if (parts.empty()) return make_true();
  Formula f = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) f = conj(f, parts[i]);
  return f;
}

}  // namespace mtl

// ---------------------------------------------------------------------------
// Time domain and robust semantics

/// Offsets of a closed interval in samples, snapped outward.
inline std::pair<std::size_t, std::size_t> sample_window(double lo, double hi, double dt) {
  if (!(dt > 0)) throw Error(Errc::Precondition, "dt must be positive");
  const auto klo = static_cast<std::size_t>(std::floor(lo / dt + 1e-9));
  const auto khi = static_cast<std::size_t>(std::ceil(hi / dt - 1e-9));
  return {klo, std::max(klo, khi)};
}

namespace detail {

// Last in-domain sample index, or -1 if the domain is empty. Domains always
// start at the first sample for these traces, so one index describes them.
inline long domain_end(const FormulaNode& f, std::size_t n, double dt) {
  switch (f.op) {
    case Op::True:
    case Op::Pred: return static_cast<long>(n) - 1;
    case Op::Not: return domain_end(*f.lhs, n, dt);
    case Op::And:
    case Op::Or: return std::min(domain_end(*f.lhs, n, dt), domain_end(*f.rhs, n, dt));
    case Op::Until: {
      const long inner = std::min(domain_end(*f.lhs, n, dt), domain_end(*f.rhs, n, dt));
      const long shift = static_cast<long>(sample_window(f.lo, f.hi, dt).second);
      return inner < 0 ? -1 : std::max(-1L, inner - shift);
    }
    case Op::Always:
    case Op::Eventually: {
      const long inner = domain_end(*f.lhs, n, dt);
      const long shift = static_cast<long>(sample_window(f.lo, f.hi, dt).second);
      return inner < 0 ? -1 : std::max(-1L, inner - shift);
    }
  }
  return -1;
}

inline std::vector<double> signal(const FormulaNode& f, const SignalTrace& tr) {
  const std::size_t n = tr.size();
  const long end = domain_end(f, n, tr.dt);
  const std::size_t len = end < 0 ? 0 : static_cast<std::size_t>(end) + 1;
  std::vector<double> out(len);
  switch (f.op) {
    case Op::True:
      std::fill(out.begin(), out.end(), kInf);
      break;
    case Op::Pred:
      for (std::size_t j = 0; j < len; ++j) out[j] = f.pred.margin(tr.states[j], tr.inputs[j], tr.times[j]);
      break;
    case Op::Not: {
      const auto s = signal(*f.lhs, tr);
      for (std::size_t j = 0; j < len; ++j) out[j] = -s[j];
      break;
    }
    case Op::And:
    case Op::Or: {
      const auto a = signal(*f.lhs, tr);
      const auto b = signal(*f.rhs, tr);
      for (std::size_t j = 0; j < len; ++j) out[j] = f.op == Op::And ? std::min(a[j], b[j]) : std::max(a[j], b[j]);
      break;
    }
    case Op::Always:
    case Op::Eventually: {
      const auto s = signal(*f.lhs, tr);
      const auto [klo, khi] = sample_window(f.lo, f.hi, tr.dt);
      for (std::size_t j = 0; j < len; ++j) {
        double v = f.op == Op::Always ? kInf : -kInf;
        for (std::size_t k = j + klo; k <= j + khi; ++k) v = f.op == Op::Always ? std::min(v, s[k]) : std::max(v, s[k]);
        out[j] = v;
      }
      break;
    }
    case Op::Until: {
      const auto s1 = signal(*f.lhs, tr);
      const auto s2 = signal(*f.rhs, tr);
      const auto [klo, khi] = sample_window(f.lo, f.hi, tr.dt);
      for (std::size_t j = 0; j < len; ++j) {
        double best = -kInf;
        double run = kInf;  // min of s1 over [j, k)
        for (std::size_t k = j; k <= j + khi; ++k) {
          if (k >= j + klo) best = std::max(best, std::min(s2[k], run));
          run = std::min(run, s1[k]);
        }
        out[j] = best;
      }
      break;
    }
  }
  return out;
}

inline bool holds(const FormulaNode& f, const SignalTrace& tr, std::size_t j) {
  switch (f.op) {
    case Op::True: return true;
    case Op::Pred: return f.pred.margin(tr.states[j], tr.inputs[j], tr.times[j]) >= 0;
    case Op::Not: return !holds(*f.lhs, tr, j);
    case Op::And: return holds(*f.lhs, tr, j) && holds(*f.rhs, tr, j);
    case Op::Or: return holds(*f.lhs, tr, j) || holds(*f.rhs, tr, j);
    case Op::Always:
    case Op::Eventually: {
      const auto [klo, khi] = sample_window(f.lo, f.hi, tr.dt);
      for (std::size_t k = j + klo; k <= j + khi; ++k) {
        const bool h = holds(*f.lhs, tr, k);
        if (f.op == Op::Always && !h) return false;
        if (f.op == Op::Eventually && h) return true;
      }
      return f.op == Op::Always;
    }
    case Op::Until: {
      const auto [klo, khi] = sample_window(f.lo, f.hi, tr.dt);
      for (std::size_t k = j + klo; k <= j + khi; ++k) {
        if (!holds(*f.rhs, tr, k)) continue;
        bool ok = true;
        for (std::size_t m = j; m < k && ok; ++m) ok = holds(*f.lhs, tr, m);
        if (ok) return true;
      }
      return false;
    }
  }
  return false;
}

}  // namespace detail

struct TimeInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double t) const { return t >= lo - 1e-9 && t <= hi + 1e-9; }
};

/// Set of times at which the formula can be evaluated on this trace.
inline TimeInterval time_domain(const Formula& f, const SignalTrace& tr) {
  if (tr.size() == 0) throw Error(Errc::Precondition, "empty trace");
  const long end = detail::domain_end(*f, tr.size(), tr.dt);
  if (end < 0) throw Error(Errc::EmptyDomain, "trace horizon is too short for the formula");
  return {tr.times.front(), tr.times[static_cast<std::size_t>(end)]};
}

/// Robustness signal over every in-domain sample (index 0 is the first sample).
inline std::vector<double> robustness_signal(const Formula& f, const SignalTrace& tr) {
  tr.validate();
  return detail::signal(*f, tr);
}

inline double robustness(const Formula& f, const SignalTrace& tr, double t) {
  const TimeInterval dom = time_domain(f, tr);
  if (!dom.contains(t)) throw Error(Errc::OutOfDomain, "t outside the formula's time domain");
  const std::size_t j = tr.index_of(t);
  tr.validate();
  // Single-point evaluation still needs the operand signals; compute and pick.
  return detail::signal(*f, tr).at(j);
}

/// Qualitative satisfaction by direct recursion (no robustness values).
inline bool satisfies(const Formula& f, const SignalTrace& tr, double t) {
  const TimeInterval dom = time_domain(f, tr);
  if (!dom.contains(t)) throw Error(Errc::OutOfDomain, "t outside the formula's time domain");
  return detail::holds(*f, tr, tr.index_of(t));
}

// ---------------------------------------------------------------------------
// Grammar

enum class VarKind { State, Input };

/// A named signal: value = scale * (state or input)[index], or, when
/// `state_row` is set, scale * (state_row·x + input_row·u + bias).
struct VariableDecl {
  std::string name;
  VarKind kind = VarKind::State;
  std::size_t index = 0;
  double scale = 1.0;
  Vector state_row;
  Vector input_row;
  double bias = 0.0;  // constant term of an output variable
};

struct ParseOptions {
  std::size_t state_dim = 0;
  std::size_t input_dim = 0;
  bool auto_normalize = true;
};

struct ParseResult {
  Formula formula;
  std::vector<std::string> warnings;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view src, const std::vector<VariableDecl>& vars, const ParseOptions& opt)
      : src_(src), vars_(vars), opt_(opt) {}

  ParseResult run() {
    ParseResult res;
    warnings_ = &res.warnings;
    res.formula = parse_or();
    skip_ws();
    if (pos_ < src_.size()) fail("unexpected trailing input");
    return res;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < pos_ && i < src_.size(); ++i) {
      if (src_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(Errc::SyntaxError, msg + " at line " + std::to_string(line) + ", column " + std::to_string(col));
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  bool peek(std::string_view tok) {
    skip_ws();
    return src_.substr(pos_, tok.size()) == tok;
  }
  bool accept(std::string_view tok) {
    if (!peek(tok)) return false;
    pos_ += tok.size();
    return true;
  }
  void expect(std::string_view tok) {
    if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
  }
  // Temporal operator letter immediately followed by '['.
  bool accept_temporal(char letter) {
    skip_ws();
    if (pos_ + 1 < src_.size() && src_[pos_] == letter) {
      std::size_t k = pos_ + 1;
      while (k < src_.size() && src_[k] == ' ') ++k;
      if (k < src_.size() && src_[k] == '[') {
        pos_ = k;
        return true;
      }
    }
    return false;
  }

  double number() {
    skip_ws();
    const char* begin = src_.data() + pos_;
    char* end = nullptr;
    std::string buf(src_.substr(pos_, std::min<std::size_t>(64, src_.size() - pos_)));
    const double v = std::strtod(buf.c_str(), &end);
    const std::size_t used = static_cast<std::size_t>(end - buf.c_str());
    if (used == 0) fail("expected a number");
    (void)begin;
    pos_ += used;
    return v;
  }
  bool at_number() {
    skip_ws();
    if (pos_ >= src_.size()) return false;
    const char ch = src_[pos_];
    return std::isdigit(static_cast<unsigned char>(ch)) || ch == '.';
  }
  std::string ident() {
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ < src_.size() && (std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    }
    if (start == pos_) fail("expected a variable name");
    return std::string(src_.substr(start, pos_ - start));
  }

  std::pair<double, double> interval() {
    expect("[");
    const double lo = number();
    expect(",");
    const double hi = number();
    expect("]");
    if (!(lo >= 0) || !(hi >= lo)) fail("interval must satisfy 0 <= lo <= hi");
    return {lo, hi};
  }

  Formula parse_or() {
    Formula f = parse_and();
    while (accept("||") || accept("|")) f = mtl::disj(f, parse_and());
    return f;
  }
  Formula parse_and() {
    Formula f = parse_until();
    while (accept("&&") || accept("&")) f = mtl::conj(f, parse_until());
    return f;
  }
  Formula parse_until() {
    Formula f = parse_unary();
    if (accept_temporal('U')) {
      const auto [lo, hi] = interval();
      f = mtl::until(f, parse_until(), lo, hi);
    }
    return f;
  }
  Formula parse_unary() {
    if (accept("!")) return mtl::negate(parse_unary());
    if (accept_temporal('G')) {
      const auto [lo, hi] = interval();
      return mtl::always(parse_unary(), lo, hi);
    }
    if (accept_temporal('F')) {
      const auto [lo, hi] = interval();
      return mtl::eventually(parse_unary(), lo, hi);
    }
    if (accept("(")) {
      Formula f = parse_or();
      expect(")");
      return f;
    }
    skip_ws();
    if (src_.substr(pos_, 4) == "true" &&
        (pos_ + 4 >= src_.size() || !std::isalnum(static_cast<unsigned char>(src_[pos_ + 4])))) {
      pos_ += 4;
      return mtl::make_true();
    }
    return atom();
  }

  const VariableDecl& lookup(const std::string& name) {
    for (const auto& v : vars_)
      if (v.name == name) return v;
    throw Error(Errc::UnknownVariable, "unknown variable '" + name + "'");
  }

  Formula atom() {
    skip_ws();
    const std::size_t start = pos_;
    LinearPredicate p;
    p.a.assign(opt_.state_dim, 0.0);
    p.c.assign(opt_.input_dim, 0.0);
    bool first = true;
    double constant = 0.0;
    while (true) {
      double sign = 1.0;
      if (accept("+")) {
      } else if (accept("-")) {
        sign = -1.0;
      } else if (!first) {
        break;
      }
      double coef = 1.0;
      if (at_number()) {
        coef = number();
        accept("*");
      }
      const VariableDecl& v = lookup(ident());
      const double w = sign * coef * v.scale;
      if (!v.state_row.empty()) {
        if (v.state_row.size() != p.a.size() || (!v.input_row.empty() && v.input_row.size() != p.c.size()))
          throw Error(Errc::DimensionMismatch, "output variable '" + v.name + "' row length");
        for (std::size_t i = 0; i < p.a.size(); ++i) p.a[i] += w * v.state_row[i];
        for (std::size_t i = 0; i < v.input_row.size(); ++i) p.c[i] += w * v.input_row[i];
        constant += w * v.bias;
      } else if (v.kind == VarKind::State) {
        if (v.index >= p.a.size()) throw Error(Errc::DimensionMismatch, "variable '" + v.name + "' index out of range");
        p.a[v.index] += w;
      } else {
        if (v.index >= p.c.size()) throw Error(Errc::DimensionMismatch, "variable '" + v.name + "' index out of range");
        p.c[v.index] += w;
      }
      first = false;
      if (peek("<") || peek(">")) break;
    }
    double dir = 1.0;
    if (accept("<=") || accept("<")) {
    } else if (accept(">=") || accept(">")) {
      dir = -1.0;
    } else {
      fail("expected '<=' or '>='");
    }
    double rhs_sign = 1.0;
    if (accept("-")) rhs_sign = -1.0;
    else accept("+");
    p.b = dir * (rhs_sign * number() - constant);
    for (double& x : p.a) x *= dir;
    for (double& x : p.c) x *= dir;
    std::string label(src_.substr(start, pos_ - start));
    while (!label.empty() && std::isspace(static_cast<unsigned char>(label.back()))) label.pop_back();
    p.label = label;

    const double na = norm2(p.a);
    if (na == 0.0) throw Error(Errc::NonNormalizedPredicate, "predicate '" + label + "' has no state term");
    if (std::abs(na - 1.0) > 1e-12) {
      if (!opt_.auto_normalize)
        throw Error(Errc::NonNormalizedPredicate, "predicate '" + label + "' has |a| = " + std::to_string(na));
      for (double& x : p.a) x /= na;
      for (double& x : p.c) x /= na;
      p.b /= na;
      p.unit = na;
      warnings_->push_back("normalized '" + label + "' by " + std::to_string(na));
    }
    return mtl::pred(std::move(p));
  }

  std::string_view src_;
  const std::vector<VariableDecl>& vars_;
  const ParseOptions& opt_;
  std::size_t pos_ = 0;
  std::vector<std::string>* warnings_ = nullptr;
};

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void print(const FormulaNode& f, const std::vector<VariableDecl>& vars, std::string& out) {
  auto interval = [&](const FormulaNode& n) { return "[" + fmt_num(n.lo) + "," + fmt_num(n.hi) + "]"; };
  switch (f.op) {
    case Op::True: out += "true"; return;
    case Op::Pred: {
      bool first = true;
      auto term = [&](double coef, const std::string& name) {
        if (coef == 0.0) return;
        if (!first) out += coef < 0 ? " - " : " + ";
        else if (coef < 0) out += "-";
        out += fmt_num(std::abs(coef)) + "*" + name;
        first = false;
      };
      auto emit = [&](const Vector& w, VarKind kind) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          if (w[i] == 0.0) continue;
          const VariableDecl* decl = nullptr;
          for (const auto& v : vars)
            if (v.kind == kind && v.index == i && v.state_row.empty()) {
              decl = &v;
              break;
            }
          if (!decl) throw Error(Errc::UnknownVariable, "no declared variable for coordinate " + std::to_string(i));
          term(w[i] / decl->scale, decl->name);
        }
      };
      emit(f.pred.a, VarKind::State);
      emit(f.pred.c, VarKind::Input);
      out += " <= " + fmt_num(f.pred.b);
      return;
    }
    case Op::Not:
      out += "!(";
      print(*f.lhs, vars, out);
      out += ")";
      return;
    case Op::And:
    case Op::Or:
    case Op::Until:
      out += "(";
      print(*f.lhs, vars, out);
      out += f.op == Op::And ? ") & (" : f.op == Op::Or ? ") | (" : ") U" + interval(f) + " (";
      print(*f.rhs, vars, out);
      out += ")";
      return;
    case Op::Always:
    case Op::Eventually:
      out += (f.op == Op::Always ? "G" : "F") + interval(f) + " (";
      print(*f.lhs, vars, out);
      out += ")";
      return;
  }
}

}  // namespace detail

inline ParseResult parse_formula(std::string_view text, const std::vector<VariableDecl>& vars, const ParseOptions& opt) {
  return detail::Parser(text, vars, opt).run();
}

inline std::string to_string(const Formula& f, const std::vector<VariableDecl>& vars) {
  std::string out;
  detail::print(*f, vars, out);
  return out;
}

/// Structural equality with a relative tolerance on numbers (offsets included).
inline bool same_formula(const Formula& x, const Formula& y, double tol = 1e-12) {
  if (!x || !y) return x == y;
  if (x->op != y->op) return false;
  auto close = [&](double p, double q) { return std::abs(p - q) <= tol * std::max({1.0, std::abs(p), std::abs(q)}); };
  auto close_vec = [&](const Vector& p, const Vector& q) {
    if (p.size() != q.size()) return false;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!close(p[i], q[i])) return false;
    return true;
  };
  switch (x->op) {
    case Op::True: return true;
    case Op::Pred: {
      const auto& p = x->pred;
      const auto& q = y->pred;
      if (!close_vec(p.a, q.a) || !close_vec(p.c, q.c) || !close(p.b, q.b) || p.offset.size() != q.offset.size())
        return false;
      for (std::size_t i = 0; i < p.offset.size(); ++i)
        if (!close(p.offset[i].start, q.offset[i].start) || !close(p.offset[i].delta, q.offset[i].delta) ||
            !close(p.offset[i].mu, q.offset[i].mu))
          return false;
      return true;
    }
    case Op::Not: return same_formula(x->lhs, y->lhs, tol);
    case Op::And:
    case Op::Or: return same_formula(x->lhs, y->lhs, tol) && same_formula(x->rhs, y->rhs, tol);
    case Op::Until:
      return close(x->lo, y->lo) && close(x->hi, y->hi) && same_formula(x->lhs, y->lhs, tol) &&
             same_formula(x->rhs, y->rhs, tol);
    case Op::Always:
    case Op::Eventually: return close(x->lo, y->lo) && close(x->hi, y->hi) && same_formula(x->lhs, y->lhs, tol);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Synthesis fragment: conjunction of G[tau_k, T_end] over conjunctions of
// linear predicates.

struct FragmentTerm {
  double tau = 0.0;
  double t_end = 0.0;
  std::vector<LinearPredicate> preds;
};

namespace detail {

inline void collect_conj(const Formula& f, std::vector<Formula>& out) {
  if (f->op == Op::And) {
    collect_conj(f->lhs, out);
    collect_conj(f->rhs, out);
  } else {
    out.push_back(f);
  }
}

}  // namespace detail

/// Decomposes a fragment formula into its G terms, ordered by tau. Equal taus
/// are accepted. With `check_nesting`, each later predicate set must imply the
/// earlier one atom-by-atom (same normal, tighter bound), a sufficient test for
/// O(p_{k+1}) ⊂ O(p_k).
inline std::vector<FragmentTerm> fragment_terms(const Formula& f, bool check_nesting = false) {
  std::vector<Formula> top;
  detail::collect_conj(f, top);
  std::vector<FragmentTerm> terms;
  for (const auto& g : top) {
    if (g->op != Op::Always) throw Error(Errc::FragmentViolation, "top-level conjunct is not an Always operator");
    std::vector<Formula> atoms;
    detail::collect_conj(g->lhs, atoms);
    FragmentTerm term{g->lo, g->hi, {}};
    for (const auto& a : atoms) {
      if (a->op != Op::Pred) throw Error(Errc::FragmentViolation, "Always body must be a conjunction of predicates");
      term.preds.push_back(a->pred);
    }
    terms.push_back(std::move(term));
  }
  std::stable_sort(terms.begin(), terms.end(), [](const auto& x, const auto& y) { return x.tau < y.tau; });
  for (std::size_t k = 1; k < terms.size(); ++k)
    if (std::abs(terms[k].t_end - terms[0].t_end) > 1e-9)
      throw Error(Errc::FragmentViolation, "all Always operators must end at the same T_end");
  if (check_nesting) {
    for (std::size_t k = 1; k < terms.size(); ++k) {
      for (const auto& outer : terms[k - 1].preds) {
        const bool implied = std::any_of(terms[k].preds.begin(), terms[k].preds.end(), [&](const LinearPredicate& in) {
          return dot(in.a, outer.a) >= 1.0 - 1e-9 && in.b <= outer.b + 1e-12;
        });
        if (!implied) throw Error(Errc::FragmentViolation, "predicate sets are not nested at term " + std::to_string(k));
      }
    }
  }
  return terms;
}

inline Formula formula_from_fragment(const std::vector<FragmentTerm>& terms) {
  std::vector<Formula> parts;
  for (const auto& t : terms) {
    std::vector<Formula> atoms;
    for (const auto& p : t.preds) atoms.push_back(mtl::pred(p));
    parts.push_back(mtl::always(mtl::conj_all(atoms), t.tau, t.t_end));
  }
  return mtl::conj_all(parts);
}

/// Offsets indexed [k][nu][i] (term, atom, schedule segment).
struct RobustModification {
  std::vector<std::vector<std::vector<double>>> delta;
  std::vector<double> mu;           // decay rate per segment
  std::vector<double> segment_start;  // absolute start time per segment
};

/// Tightens each fragment predicate bound by the piecewise exponential offset.
inline Formula robustify(const Formula& f, const RobustModification& mod) {
  auto terms = fragment_terms(f);
  const std::size_t segs = mod.segment_start.size();
  if (mod.mu.size() != segs) throw Error(Errc::DimensionMismatch, "mu and segment starts differ in length");
  if (mod.delta.size() < terms.size()) throw Error(Errc::MissingOffset, "offsets missing for some term");
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (mod.delta[k].size() < terms[k].preds.size()) throw Error(Errc::MissingOffset, "offsets missing for some atom");
    for (std::size_t v = 0; v < terms[k].preds.size(); ++v) {
      const auto& d = mod.delta[k][v];
      if (d.size() < segs) throw Error(Errc::MissingOffset, "offsets missing for some segment");
      auto& p = terms[k].preds[v];
      p.offset.clear();
      const bool any = std::any_of(d.begin(), d.begin() + static_cast<long>(segs), [](double x) { return x != 0.0; });
      for (std::size_t i = 0; i < segs; ++i) {
        if (d[i] < 0) throw Error(Errc::Precondition, "negative offset");
        if (any) p.offset.push_back({mod.segment_start[i], d[i], mod.mu[i]});
      }
    }
  }
  return formula_from_fragment(terms);
}

}  // namespace certsynth
