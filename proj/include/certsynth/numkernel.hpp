#pragma once

// Dense linear algebra for the small systems (n <= ~30) handled by the toolkit:
// a row-major matrix type, symmetric eigen-decomposition (cyclic Jacobi),
// general eigenvalues (Hessenberg + shifted QR), LU solves, Lyapunov solves and
// the zero-order-hold matrix exponential.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "certsynth/error.hpp"

namespace certsynth {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw Error(Errc::DimensionMismatch, "ragged matrix literal");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix diag(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }
  static Matrix column(std::span<const double> v) {
    Matrix m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data_.begin());
    return m;
  }
  static Matrix from_rows(std::size_t rows, std::size_t cols, std::span<const double> values) {
    if (values.size() != rows * cols) throw Error(Errc::DimensionMismatch, "entry count != rows*cols");
    Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  Vector col(std::size_t j) const {
    Vector v(rows_);
    for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
    return v;
  }
  const std::vector<double>& values() const noexcept { return data_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix& operator+=(const Matrix& o) {
    check_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    check_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  friend Matrix operator-(Matrix a) { return a *= -1.0; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw Error(Errc::DimensionMismatch, "matrix product");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        const double* brow = b.data_.data() + k * b.cols_;
        double* crow = c.data_.data() + i * c.cols_;
        for (std::size_t j = 0; j < b.cols_; ++j) crow[j] += aik * brow[j];
      }
    }
    return c;
  }

  friend Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols_ != x.size()) throw Error(Errc::DimensionMismatch, "matrix-vector product");
    Vector y(a.rows_, 0.0);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      const double* r = a.data_.data() + i * a.cols_;
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols_; ++j) s += r[j] * x[j];
      y[i] = s;
    }
    return y;
  }
  friend Vector operator*(const Matrix& a, const Vector& x) { return a * std::span<const double>(x); }

  bool operator==(const Matrix& o) const = default;

  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) throw Error(Errc::DimensionMismatch, "block out of range");
    Matrix b(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < nc; ++j) b(i, j) = (*this)(r0 + i, c0 + j);
    return b;
  }
  void set_block(std::size_t r0, std::size_t c0, const Matrix& b) {
    if (r0 + b.rows_ > rows_ || c0 + b.cols_ > cols_) throw Error(Errc::DimensionMismatch, "set_block out of range");
    for (std::size_t i = 0; i < b.rows_; ++i)
      for (std::size_t j = 0; j < b.cols_; ++j) (*this)(r0 + i, c0 + j) = b(i, j);
  }
  /// Rows `ri` and columns `ci` picked out (in the given order).
  Matrix select(std::span<const std::size_t> ri, std::span<const std::size_t> ci) const {
    Matrix s(ri.size(), ci.size());
    for (std::size_t i = 0; i < ri.size(); ++i)
      for (std::size_t j = 0; j < ci.size(); ++j) s(i, j) = (*this)(ri[i], ci[j]);
    return s;
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }
  double norm_fro() const {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return std::sqrt(s);
  }
  double norm_max() const {
    double s = 0.0;
    for (double x : data_) s = std::max(s, std::abs(x));
    return s;
  }
  /// Induced 1-norm (max column sum).
  double norm1() const {
    double best = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < rows_; ++i) s += std::abs((*this)(i, j));
      best = std::max(best, s);
    }
    return best;
  }
  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
  }

 private:
  void check_same(const Matrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw Error(Errc::DimensionMismatch, "elementwise op");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::DimensionMismatch, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// xᵀ S x
inline double quad_form(const Matrix& s, std::span<const double> x) {
  const Vector sx = s * x;
  return dot(x, sx);
}

inline Vector axpy(double alpha, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::DimensionMismatch, "axpy");
  Vector out(y.begin(), y.end());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += alpha * x[i];
  return out;
}

inline Vector sub(std::span<const double> a, std::span<const double> b) { return axpy(-1.0, b, a); }

inline double asymmetry(const Matrix& s) {
  double worst = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = i + 1; j < s.cols(); ++j) worst = std::max(worst, std::abs(s(i, j) - s(j, i)));
  return worst;
}

inline Matrix symmetrize(const Matrix& s) {
  Matrix t = s;
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = i + 1; j < s.cols(); ++j) t(i, j) = t(j, i) = 0.5 * (s(i, j) + s(j, i));
  return t;
}

// ---------------------------------------------------------------------------
// Symmetric eigen-decomposition

struct SymEig {
  Vector eigenvalues;  // ascending
  Matrix eigenvectors;  // columns, orthonormal
};

/// Cyclic Jacobi rotations. Throws NonSymmetric when the relative asymmetry
/// exceeds 1e-10, NoConvergence after 100 sweeps.
inline SymEig sym_eig(const Matrix& s_in) {
  if (!s_in.square() || s_in.empty()) throw Error(Errc::DimensionMismatch, "sym_eig needs a square matrix");
  const std::size_t n = s_in.rows();
  const double scale = std::max(1.0, s_in.norm_max());
  if (asymmetry(s_in) > 1e-10 * scale) throw Error(Errc::NonSymmetric, "asymmetry above 1e-10 relative");

  Matrix a = symmetrize(s_in);
  Matrix v = Matrix::identity(n);
  constexpr int kMaxSweeps = 100;
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-30 * std::max(1e-300, a.norm_fro() * a.norm_fro())) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) throw Error(Errc::NoConvergence, "Jacobi did not converge in 100 sweeps");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymEig out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = v(i, order[k]);
  }
  return out;
}

inline double min_eigenvalue(const Matrix& s) { return sym_eig(s).eigenvalues.front(); }
inline double max_eigenvalue(const Matrix& s) { return sym_eig(s).eigenvalues.back(); }

/// True iff the smallest eigenvalue of symmetric `s` exceeds `tol`.
inline bool is_pd(const Matrix& s, double tol) { return min_eigenvalue(s) > tol; }

// ---------------------------------------------------------------------------
// LU with partial pivoting

class Lu {
 public:
  explicit Lu(Matrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    if (!lu_.square()) throw Error(Errc::DimensionMismatch, "LU needs a square matrix");
    const std::size_t n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), 0);
    const double scale = std::max(lu_.norm_max(), 1e-300);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > std::abs(lu_(piv, k))) piv = i;
      if (std::abs(lu_(piv, k)) <= 1e-14 * scale) throw Error(Errc::Singular, "matrix is numerically singular");
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
        std::swap(perm_[k], perm_[piv]);
        sign_ = -sign_;
      }
      const double inv = 1.0 / lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = (lu_(i, k) *= inv);
        if (f == 0.0) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  std::size_t size() const noexcept { return lu_.rows(); }

  Vector solve(std::span<const double> b) const {
    const std::size_t n = lu_.rows();
    if (b.size() != n) throw Error(Errc::DimensionMismatch, "LU solve rhs");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
      x[i] /= lu_(i, i);
    }
    return x;
  }

  /// Solves xᵀA = bᵀ.
  Vector solve_transposed(std::span<const double> b) const {
    const std::size_t n = lu_.rows();
    if (b.size() != n) throw Error(Errc::DimensionMismatch, "LU solve rhs");
    Vector y(b.begin(), b.end());
    // Uᵀ z = b
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) y[i] -= lu_(j, i) * y[j];
      y[i] /= lu_(i, i);
    }
    // Lᵀ w = z
    for (std::size_t i = n; i-- > 0;)
      for (std::size_t j = i + 1; j < n; ++j) y[i] -= lu_(j, i) * y[j];
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[perm_[i]] = y[i];
    return x;
  }

  Matrix solve(const Matrix& b) const {
    Matrix x(b.rows(), b.cols());
    for (std::size_t j = 0; j < b.cols(); ++j) {
      const Vector xj = solve(b.col(j));
      for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = xj[i];
    }
    return x;
  }

  double determinant() const {
    double d = sign_;
    for (std::size_t i = 0; i < lu_.rows(); ++i) d *= lu_(i, i);
    return d;
  }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  double sign_ = 1.0;
};

inline Matrix inverse(const Matrix& a) { return Lu(a).solve(Matrix::identity(a.rows())); }
inline Vector solve(const Matrix& a, std::span<const double> b) { return Lu(a).solve(b); }

// ---------------------------------------------------------------------------
// General eigenvalues: Householder reduction to Hessenberg form followed by
// complex single-shift QR with Wilkinson shifts.

inline std::vector<std::complex<double>> eigenvalues(const Matrix& a_in) {
  if (!a_in.square()) throw Error(Errc::DimensionMismatch, "eigenvalues need a square matrix");
  const std::size_t n = a_in.rows();
  using cd = std::complex<double>;
  if (n == 0) return {};
  Matrix a = a_in;
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double alpha = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) alpha += a(i, k) * a(i, k);
    alpha = std::sqrt(alpha);
    if (alpha < 1e-300) continue;
    if (a(k + 1, k) > 0) alpha = -alpha;
    Vector v(n, 0.0);
    v[k + 1] = a(k + 1, k) - alpha;
    for (std::size_t i = k + 2; i < n; ++i) v[i] = a(i, k);
    const double vnorm2 = dot(v, v);
    if (vnorm2 < 1e-300) continue;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k + 1; i < n; ++i) s += v[i] * a(i, j);
      s = 2.0 * s / vnorm2;
      for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= s * v[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * v[j];
      s = 2.0 * s / vnorm2;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= s * v[j];
    }
  }

  std::vector<cd> h(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) h[i * n + j] = (j + 1 >= i) ? cd(a(i, j), 0.0) : cd(0.0, 0.0);
  auto H = [&](std::size_t i, std::size_t j) -> cd& { return h[i * n + j]; };

  std::vector<cd> eig(n);
  std::size_t hi = n - 1;
  int iter = 0;
  const double eps = 1e-15;
  std::vector<cd> cs(n), ss(n);
  while (true) {
    if (hi == 0) {
      eig[0] = H(0, 0);
      break;
    }
    std::size_t l = hi;
    while (l > 0) {
      const double tiny = eps * (std::abs(H(l - 1, l - 1)) + std::abs(H(l, l)));
      if (std::abs(H(l, l - 1)) <= std::max(tiny, 1e-300)) {
        H(l, l - 1) = 0.0;
        break;
      }
      --l;
    }
    if (l == hi) {
      eig[hi] = H(hi, hi);
      --hi;
      iter = 0;
      continue;
    }
    if (++iter > 60 * static_cast<int>(n)) throw Error(Errc::NoConvergence, "QR eigenvalue iteration");
    cd shift;
    if (iter % 11 == 10) {
      shift = H(hi, hi) + cd(std::abs(H(hi, hi - 1)), 0.0);
    } else {
      const cd p = H(hi - 1, hi - 1), q = H(hi - 1, hi), r = H(hi, hi - 1), s = H(hi, hi);
      const cd half_tr = 0.5 * (p + s);
      const cd disc = std::sqrt(half_tr * half_tr - (p * s - q * r));
      const cd m1 = half_tr + disc, m2 = half_tr - disc;
      shift = (std::abs(m1 - s) < std::abs(m2 - s)) ? m1 : m2;
    }
    for (std::size_t k = l; k <= hi; ++k) H(k, k) -= shift;
    for (std::size_t k = l; k < hi; ++k) {
      const cd x = H(k, k), y = H(k + 1, k);
      const double r = std::sqrt(std::norm(x) + std::norm(y));
      cd c = 1.0, s = 0.0;
      if (r > 1e-300) {
        c = x / r;
        s = y / r;
      }
      cs[k] = c;
      ss[k] = s;
      for (std::size_t j = k; j <= hi; ++j) {
        const cd t1 = H(k, j), t2 = H(k + 1, j);
        H(k, j) = std::conj(c) * t1 + std::conj(s) * t2;
        H(k + 1, j) = -s * t1 + c * t2;
      }
    }
    for (std::size_t k = l; k < hi; ++k) {
      const cd c = cs[k], s = ss[k];
      const std::size_t top = std::min(k + 2, hi);
      for (std::size_t i = l; i <= top; ++i) {
        const cd t1 = H(i, k), t2 = H(i, k + 1);
        H(i, k) = t1 * c + t2 * s;
        H(i, k + 1) = -t1 * std::conj(s) + t2 * std::conj(c);
      }
    }
    for (std::size_t k = l; k <= hi; ++k) H(k, k) += shift;
  }
  return eig;
}

/// Largest real part over the spectrum.
inline double spectral_abscissa(const Matrix& a) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& z : eigenvalues(a)) best = std::max(best, z.real());
  return best;
}

inline bool is_hurwitz(const Matrix& a, double margin = 1e-10) { return spectral_abscissa(a) < -margin; }

// ---------------------------------------------------------------------------
// Lyapunov equation (A + μ/2 I)ᵀ M + M (A + μ/2 I) = −Q

/// Factorizes the Kronecker operator once so that many weightings Q can be
/// solved against the same (A, μ).
class LyapunovSolver {
 public:
  LyapunovSolver(const Matrix& a, double mu) : n_(a.rows()), a_(a), mu_(mu) {
    if (!a.square()) throw Error(Errc::DimensionMismatch, "Lyapunov needs a square A");
    if (mu < 0) throw Error(Errc::Precondition, "mu must be >= 0");
    Matrix shifted = a + Matrix::identity(n_) * (0.5 * mu);
    const double abscissa = spectral_abscissa(shifted);
    if (abscissa >= -1e-10)
      throw Error(Errc::NotHurwitz, "A + (mu/2)I has spectral abscissa " + std::to_string(abscissa));
    const std::size_t nn = n_ * n_;
    Matrix k(nn, nn);
    // vec index of M(i,j) is i + j n
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const std::size_t row = i + j * n_;
        for (std::size_t r = 0; r < n_; ++r) {
          k(row, r + j * n_) += shifted(r, i);  // (Aμᵀ M)(i,j)
          k(row, i + r * n_) += shifted(r, j);  // (M Aμ)(i,j)
        }
      }
    }
    lu_.emplace_back(std::move(k));
  }

  Matrix solve(const Matrix& q) const {
    if (q.rows() != n_ || q.cols() != n_) throw Error(Errc::DimensionMismatch, "Lyapunov Q");
    Vector rhs(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) rhs[i + j * n_] = -q(i, j);
    const Vector m = lu_.front().solve(rhs);
    Matrix out(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) out(i, j) = m[i + j * n_];
    out = symmetrize(out);
    const double res = residual(out, q);
    if (!(res <= 1e-8 * std::max(q.norm_fro(), 1e-300)))
      throw Error(Errc::NoConvergence, "Lyapunov residual " + std::to_string(res));
    return out;
  }

  /// Adjoint of Q ↦ solve(Q) in the trace inner product: returns P with
  /// <W, solve(Q)> = <P, Q>. P solves Aμ P + P Aμᵀ = −W.
  Matrix solve_adjoint(const Matrix& w) const {
    if (w.rows() != n_ || w.cols() != n_) throw Error(Errc::DimensionMismatch, "Lyapunov adjoint W");
    Vector rhs(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) rhs[i + j * n_] = -w(i, j);
    const Vector p = lu_.front().solve_transposed(rhs);
    Matrix out(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) out(i, j) = p[i + j * n_];
    return out;
  }

  std::size_t dim() const { return n_; }

  /// ‖AᵀM + MA + μM + Q‖_F
  double residual(const Matrix& m, const Matrix& q) const {
    Matrix r = a_.transpose() * m + m * a_ + m * mu_ + q;
    return r.norm_fro();
  }

 private:
  std::size_t n_;
  Matrix a_;
  double mu_;
  std::vector<Lu> lu_;  // holds exactly one factorization
};

inline Matrix lyapunov_solve(const Matrix& a, const Matrix& q, double mu) { return LyapunovSolver(a, mu).solve(q); }

// ---------------------------------------------------------------------------
// Matrix exponential (scaling and squaring with a truncated Taylor series)

inline Matrix expm(const Matrix& a) {
  if (!a.square()) throw Error(Errc::DimensionMismatch, "expm needs a square matrix");
  const std::size_t n = a.rows();
  const double nrm = a.norm1();
  int squarings = 0;
  if (nrm > 0.25) squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.25)));
  const Matrix scaled = a * std::ldexp(1.0, -squarings);
  Matrix result = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (int k = 1; k <= 20; ++k) {
    term = term * scaled;
    term *= 1.0 / k;
    result += term;
    if (term.norm_max() < 1e-18 * result.norm_max()) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

struct Discretized {
  Matrix ad;  // exp(A dt)
  Matrix bd;  // ∫_0^dt exp(Aτ) dτ · B
};

/// Exact zero-order-hold discretization via the augmented exponential
/// exp([[A, B], [0, 0]] dt).
inline Discretized expm_with_input(const Matrix& a, const Matrix& b, double dt) {
  if (!a.square() || a.rows() != b.rows()) throw Error(Errc::DimensionMismatch, "expm_with_input");
  if (!(dt > 0)) throw Error(Errc::Precondition, "dt must be positive");
  const std::size_t n = a.rows(), p = b.cols();
  Matrix aug(n + p, n + p);
  aug.set_block(0, 0, a * dt);
  aug.set_block(0, n, b * dt);
  const Matrix e = expm(aug);
  return {e.block(0, 0, n, n), e.block(0, n, n, p)};
}

}  // namespace certsynth
