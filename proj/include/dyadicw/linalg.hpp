#pragma once

// Small dense vectors/matrices (n <= 4) with symmetric eigensolver and
// SPD fractional powers. Everything is stack-allocated and exception-checked;
// these types back every weight/operator computation in the library.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace dyadicw {

inline constexpr int kMaxDim = 4;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

inline void check_dim(int n, const char* what) {
  if (n < 1 || n > kMaxDim)
    fail(std::string(what) + ": dimension " + std::to_string(n) +
         " outside supported range [1," + std::to_string(kMaxDim) + "]");
}

class Vec {
 public:
  Vec() = default;
  explicit Vec(int n) : n_(n) { check_dim(n, "Vec"); a_.fill(0.0); }

  static Vec unit(int n, int i) {
    Vec v(n);
    require(i >= 0 && i < n, "Vec::unit: index out of range");
    v[i] = 1.0;
    return v;
  }

  int dim() const { return n_; }
  double& operator[](int i) { return a_[static_cast<size_t>(i)]; }
  double operator[](int i) const { return a_[static_cast<size_t>(i)]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < n_; ++i) a_[i] += o.a_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < n_; ++i) a_[i] -= o.a_[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < n_; ++i) a_[i] *= s;
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(Vec a, double s) { return a *= s; }
  friend Vec operator*(double s, Vec a) { return a *= s; }

  double dot(const Vec& o) const {
    double s = 0.0;
    for (int i = 0; i < n_; ++i) s += a_[i] * o.a_[i];
    return s;
  }
  double norm() const { return std::sqrt(dot(*this)); }

 private:
  int n_ = 0;
  std::array<double, kMaxDim> a_{};
};

class Mat {
 public:
  Mat() = default;
  explicit Mat(int n) : n_(n) { check_dim(n, "Mat"); a_.fill(0.0); }

  static Mat identity(int n) {
    Mat m(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat diag(const Vec& d) {
    Mat m(d.dim());
    for (int i = 0; i < d.dim(); ++i) m(i, i) = d[i];
    return m;
  }
  static Mat rotation2(double theta) {
    Mat r(2);
    r(0, 0) = std::cos(theta);
    r(0, 1) = -std::sin(theta);
    r(1, 0) = std::sin(theta);
    r(1, 1) = std::cos(theta);
    return r;
  }

  int dim() const { return n_; }
  double& operator()(int i, int j) { return a_[static_cast<size_t>(i * n_ + j)]; }
  double operator()(int i, int j) const { return a_[static_cast<size_t>(i * n_ + j)]; }

  Mat& operator+=(const Mat& o) {
    for (int i = 0; i < n_ * n_; ++i) a_[i] += o.a_[i];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    for (int i = 0; i < n_ * n_; ++i) a_[i] -= o.a_[i];
    return *this;
  }
  Mat& operator*=(double s) {
    for (int i = 0; i < n_ * n_; ++i) a_[i] *= s;
    return *this;
  }
  friend Mat operator+(Mat a, const Mat& b) { return a += b; }
  friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
  friend Mat operator*(Mat a, double s) { return a *= s; }
  friend Mat operator*(double s, Mat a) { return a *= s; }

  friend Mat operator*(const Mat& a, const Mat& b) {
    Mat c(a.n_);
    for (int i = 0; i < a.n_; ++i)
      for (int k = 0; k < a.n_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (int j = 0; j < a.n_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }
  friend Vec operator*(const Mat& a, const Vec& x) {
    Vec y(a.n_);
    for (int i = 0; i < a.n_; ++i) {
      double s = 0.0;
      for (int j = 0; j < a.n_; ++j) s += a(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }

  Mat transpose() const {
    Mat t(n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double frobenius() const {
    double s = 0.0;
    for (int i = 0; i < n_ * n_; ++i) s += a_[i] * a_[i];
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (int i = 0; i < n_ * n_; ++i) m = std::max(m, std::abs(a_[i]));
    return m;
  }

  bool is_symmetric(double rel_tol = 1e-12) const {
    const double scale = max_abs();
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j)
        if (std::abs((*this)(i, j) - (*this)(j, i)) > rel_tol * std::max(scale, 1.0))
          return false;
    return true;
  }

  bool operator==(const Mat& o) const {
    if (n_ != o.n_) return false;
    for (int i = 0; i < n_ * n_; ++i)
      if (a_[i] != o.a_[i]) return false;
    return true;
  }

 private:
  int n_ = 0;
  std::array<double, kMaxDim * kMaxDim> a_{};
};

// LU with partial pivoting; shared by det() and inverse().
namespace detail {
struct Lu {
  Mat lu;
  std::array<int, kMaxDim> perm{};
  int sign = 1;
  bool singular = false;
};

inline Lu lu_decompose(const Mat& m) {
  const int n = m.dim();
  Lu r{m, {}, 1, false};
  for (int i = 0; i < n; ++i) r.perm[static_cast<size_t>(i)] = i;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = std::abs(r.lu(col, col));
    for (int row = col + 1; row < n; ++row) {
      const double v = std::abs(r.lu(row, col));
      if (v > best) { best = v; piv = row; }
    }
    if (best == 0.0) { r.singular = true; return r; }
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(r.lu(piv, j), r.lu(col, j));
      std::swap(r.perm[static_cast<size_t>(piv)], r.perm[static_cast<size_t>(col)]);
      r.sign = -r.sign;
    }
    for (int row = col + 1; row < n; ++row) {
      const double f = r.lu(row, col) / r.lu(col, col);
      r.lu(row, col) = f;
      for (int j = col + 1; j < n; ++j) r.lu(row, j) -= f * r.lu(col, j);
    }
  }
  return r;
}
}  // namespace detail

inline double det(const Mat& m) {
  auto lu = detail::lu_decompose(m);
  if (lu.singular) return 0.0;
  double d = lu.sign;
  for (int i = 0; i < m.dim(); ++i) d *= lu.lu(i, i);
  return d;
}

inline Mat inverse(const Mat& m) {
  const int n = m.dim();
  auto lu = detail::lu_decompose(m);
  if (lu.singular) fail("inverse: singular matrix");
  Mat inv(n);
  for (int col = 0; col < n; ++col) {
    std::array<double, kMaxDim> x{};
    // forward solve L y = P e_col
    for (int i = 0; i < n; ++i) {
      double s = (lu.perm[static_cast<size_t>(i)] == col) ? 1.0 : 0.0;
      for (int j = 0; j < i; ++j) s -= lu.lu(i, j) * x[static_cast<size_t>(j)];
      x[static_cast<size_t>(i)] = s;
    }
    // back solve U x = y
    for (int i = n - 1; i >= 0; --i) {
      double s = x[static_cast<size_t>(i)];
      for (int j = i + 1; j < n; ++j) s -= lu.lu(i, j) * x[static_cast<size_t>(j)];
      x[static_cast<size_t>(i)] = s / lu.lu(i, i);
    }
    for (int i = 0; i < n; ++i) inv(i, col) = x[static_cast<size_t>(i)];
  }
  return inv;
}

struct EigenSym {
  Vec values;   // descending
  Mat vectors;  // columns are eigenvectors; M = Q diag(values) Q^T
};

// Cyclic Jacobi sweeps; terminates when the off-diagonal mass drops below
// 1e-12 relative to the Frobenius norm. Adequate and robust for n <= 4.
inline EigenSym eigen_sym(const Mat& m, double tol = 1e-12, int max_sweeps = 64) {
  require(m.is_symmetric(1e-9), "eigen_sym: matrix is not symmetric");
  const int n = m.dim();
  Mat a = m;
  // symmetrize exactly so rotations preserve symmetry bit-for-bit
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
  Mat q = Mat::identity(n);
  const double frob = std::max(a.frobenius(), std::numeric_limits<double>::min());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    if (std::sqrt(off) <= tol * frob) break;
    for (int p = 0; p < n - 1; ++p)
      for (int r = p + 1; r < n; ++r) {
        const double apr = a(p, r);
        if (std::abs(apr) <= 1e-300) continue;
        const double tau = (a(r, r) - a(p, p)) / (2.0 * apr);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akr = a(k, r);
          a(k, p) = c * akp - s * akr;
          a(k, r) = s * akp + c * akr;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), ark = a(r, k);
          a(p, k) = c * apk - s * ark;
          a(r, k) = s * apk + c * ark;
        }
        for (int k = 0; k < n; ++k) {
          const double qkp = q(k, p), qkr = q(k, r);
          q(k, p) = c * qkp - s * qkr;
          q(k, r) = s * qkp + c * qkr;
        }
      }
  }
  EigenSym e{Vec(n), Mat(n)};
  std::array<int, kMaxDim> order{};
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (a(order[static_cast<size_t>(j)], order[static_cast<size_t>(j)]) >
          a(order[static_cast<size_t>(i)], order[static_cast<size_t>(i)]))
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  for (int i = 0; i < n; ++i) {
    const int src = order[static_cast<size_t>(i)];
    e.values[i] = a(src, src);
    for (int k = 0; k < n; ++k) e.vectors(k, i) = q(k, src);
  }
  return e;
}

inline void ensure_spd(const Mat& m, const char* context, double tol = 1e-11) {
  require(m.is_symmetric(1e-9),
          std::string(context) + ": matrix is not symmetric");
  const auto e = eigen_sym(m);
  const double scale = std::max(std::abs(e.values[0]), 1e-300);
  for (int i = 0; i < m.dim(); ++i)
    if (e.values[i] <= tol * scale && e.values[i] <= 0.0)
      fail(std::string(context) + ": matrix is not positive definite (eigenvalue " +
           std::to_string(e.values[i]) + ")");
}

// M^t for symmetric positive definite M, via eigendecomposition.
inline Mat spd_power(const Mat& m, double t) {
  if (m.dim() == 1) {
    require(m(0, 0) > 0.0, "spd_power: nonpositive 1x1 matrix");
    Mat r(1);
    r(0, 0) = std::pow(m(0, 0), t);
    return r;
  }
  const auto e = eigen_sym(m);
  const int n = m.dim();
  require(e.values[n - 1] > 0.0, "spd_power: matrix is not positive definite");
  Mat r(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        s += e.vectors(i, k) * std::pow(e.values[k], t) * e.vectors(j, k);
      r(i, j) = s;
    }
  // force exact symmetry against fp drift
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = 0.5 * (r(i, j) + r(j, i));
      r(i, j) = v;
      r(j, i) = v;
    }
  return r;
}

// Spectral norm (largest singular value).
inline double op_norm(const Mat& m) {
  const int n = m.dim();
  if (n == 1) return std::abs(m(0, 0));
  if (n == 2) {
    const double q = m(0, 0) * m(0, 0) + m(0, 1) * m(0, 1) +
                     m(1, 0) * m(1, 0) + m(1, 1) * m(1, 1);
    const double d = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = std::max(q * q - 4.0 * d * d, 0.0);
    return std::sqrt(0.5 * (q + std::sqrt(disc)));
  }
  Mat g = m.transpose() * m;
  const auto e = eigen_sym(g);
  return std::sqrt(std::max(e.values[0], 0.0));
}

inline double smallest_singular_value(const Mat& m) {
  const int n = m.dim();
  Mat g = m.transpose() * m;
  const auto e = eigen_sym(g);
  return std::sqrt(std::max(e.values[n - 1], 0.0));
}

// Predicate for the determinant-norm implication: whenever the smallest
// singular value of A is >= 1 and |det A| <= delta, the spectral norm must
// satisfy ||A|| <= delta as well. Returns whether the conclusion holds
// (with a hair of fp slack); callers establish the hypothesis.
inline bool det_norm_bound_check(const Mat& a, double delta) {
  require(delta >= 0.0, "det_norm_bound_check: delta must be nonnegative");
  return op_norm(a) <= delta * (1.0 + 1e-9) + 1e-300;
}

}  // namespace dyadicw
