#pragma once

// Truncated principal-value quadrature for the matrix kernels used by the
// counterexample experiments: the antisymmetric K(x,y) = A/(x-y) and a
// smoothed symmetric diagnostic K(x,y) = A/|x-y|^{1/2}. Midpoint rule off the
// diagonal with symmetric eps-truncation; on symmetric stencils the odd
// kernel cancels pairwise, which the pairing form exploits bit-for-bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dyadic.hpp"
#include "linalg.hpp"
#include "threading.hpp"

namespace dyadicw {

enum class KernelKind {
  antisymmetric,  // A / (x - y)
  smoothed,       // A / |x - y|^{1/2}
};

inline const char* kernel_name(KernelKind k) {
  return k == KernelKind::antisymmetric ? "antisymmetric" : "smoothed";
}

struct CzoKernel {
  Mat a;
  KernelKind kind = KernelKind::antisymmetric;
};

inline double kernel_scalar(KernelKind kind, double x, double y) {
  const double d = x - y;
  if (kind == KernelKind::antisymmetric) return 1.0 / d;
  return 1.0 / std::sqrt(std::fabs(d));
}

// Default symmetric truncation: two cell widths.
inline double default_truncation(int resolution) {
  return 2.0 * std::exp2(-resolution);
}

namespace detail {

inline void check_truncation(int resolution, double eps) {
  require(resolution >= 1 && resolution <= kMaxLevel,
          "czo: resolution out of range (resolution error)");
  require(eps >= std::exp2(-resolution),
          "czo: truncation eps below the grid cell width (quadrature error)");
}

}  // namespace detail

// (T_eps f)(x) = sum over cells with |mid_j - x| > eps of K(x, mid_j) f_j |cell|.
// x need not be a grid midpoint; cells straddling the cutoff are excluded whole.
inline Vec czo_apply_at(const CzoKernel& k, const VectorField& f, double x,
                        double eps) {
  detail::check_truncation(f.resolution, eps);
  require(k.a.dim() == f.dim, "czo: kernel dimension mismatch");
  const double h = std::exp2(-f.resolution);
  Vec acc(f.dim);
  for (std::size_t j = 0; j < f.cells.size(); ++j) {
    const double y = (static_cast<double>(j) + 0.5) * h;
    if (std::fabs(y - x) <= eps) continue;
    acc += f.cells[j] * kernel_scalar(k.kind, x, y);
  }
  return k.a * (acc * h);
}

inline VectorField czo_apply(const CzoKernel& k, const VectorField& f, double eps) {
  detail::check_truncation(f.resolution, eps);
  require(k.a.dim() == f.dim, "czo: kernel dimension mismatch");
  // Zero cells contribute exact zeros to the accumulator, so skipping them is
  // bitwise identical to the dense loop and makes concentrated inputs cheap.
  std::vector<std::size_t> support;
  support.reserve(f.cells.size());
  for (std::size_t j = 0; j < f.cells.size(); ++j) {
    bool nonzero = false;
    for (int d = 0; d < f.dim; ++d) nonzero = nonzero || f.cells[j][d] != 0.0;
    if (nonzero) support.push_back(j);
  }
  VectorField out = VectorField::zero(f.dim, f.resolution);
  const double h = std::exp2(-f.resolution);
  parallel_for(f.cells.size(), [&](std::size_t i) {
    const double x = (static_cast<double>(i) + 0.5) * h;
    Vec acc(f.dim);
    for (std::size_t j : support) {
      const double y = (static_cast<double>(j) + 0.5) * h;
      if (std::fabs(y - x) <= eps) continue;
      acc += f.cells[j] * kernel_scalar(k.kind, x, y);
    }
    out.cells[i] = k.a * (acc * h);
  });
  return out;
}

// <T 1_I, 1_I> = int_I int_I K(x,y) dy dx by the pairwise-symmetrized midpoint
// rule: each unordered pair contributes K(x_i,x_j) + K(x_j,x_i), so the
// antisymmetric kernel yields an exact zero, not a small residual.
inline Mat czo_pairing(const CzoKernel& k, const DyadicCube& I, int resolution,
                       double eps) {
  validate_cube(I);
  detail::check_truncation(resolution, eps);
  require(I.level <= resolution, "czo: cube finer than the grid (resolution error)");
  const double h = std::exp2(-resolution);
  const std::size_t span = std::size_t{1} << (resolution - I.level);
  const std::size_t start = static_cast<std::size_t>(I.index) * span;
  double s = 0.0;
  for (std::size_t i = 0; i < span; ++i) {
    const double xi = (static_cast<double>(start + i) + 0.5) * h;
    for (std::size_t j = i + 1; j < span; ++j) {
      const double xj = (static_cast<double>(start + j) + 0.5) * h;
      if (xj - xi <= eps) continue;
      s += kernel_scalar(k.kind, xi, xj) + kernel_scalar(k.kind, xj, xi);
    }
  }
  return k.a * (s * h * h);
}

struct WeakBoundednessRow {
  int level = 0;
  double value = 0.0;  // max over cubes at this level of |I|^{-1} ||<T 1_I, 1_I>||
};

inline std::vector<WeakBoundednessRow> weak_boundedness_table(const CzoKernel& k,
                                                              int resolution,
                                                              int level_min,
                                                              int level_max,
                                                              double eps) {
  detail::check_truncation(resolution, eps);
  require(0 <= level_min && level_min <= level_max && level_max <= resolution,
          "czo: bad level range");
  std::vector<WeakBoundednessRow> rows;
  for (int lvl = level_min; lvl <= level_max; ++lvl) {
    const std::size_t count = std::size_t{1} << lvl;
    std::vector<double> vals(count, 0.0);
    parallel_for(count, [&](std::size_t i) {
      const Mat m =
          czo_pairing(k, DyadicCube{lvl, static_cast<std::int64_t>(i)}, resolution, eps);
      vals[i] = op_norm(m) * std::exp2(lvl);
    });
    rows.push_back({lvl, *std::max_element(vals.begin(), vals.end())});
  }
  return rows;
}

}  // namespace dyadicw
