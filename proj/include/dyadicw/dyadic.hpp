#pragma once

// Dyadic intervals on [0,1), piecewise-constant vector/matrix fields, and
// exact Haar analysis/synthesis. Cubes are heap-indexed: flat_index = 2^j + k,
// so the root is 1 and children of i are 2i, 2i+1. All integrals over cell
// arrays are finite sums and therefore exact up to fp accumulation.

#include <cstdint>
#include <functional>
#include <vector>

#include "linalg.hpp"

namespace dyadicw {

inline constexpr int kMaxLevel = 24;

struct DyadicCube {
  int level = 0;
  std::int64_t index = 0;

  bool operator==(const DyadicCube& o) const {
    return level == o.level && index == o.index;
  }
};

inline void validate_cube(const DyadicCube& c) {
  require(c.level >= 0 && c.level <= kMaxLevel,
          "cube level " + std::to_string(c.level) + " outside [0," +
              std::to_string(kMaxLevel) + "] (resolution error)");
  require(c.index >= 0 && c.index < (std::int64_t{1} << c.level),
          "cube index out of range at level " + std::to_string(c.level));
}

inline DyadicCube root_cube() { return DyadicCube{0, 0}; }
inline double cube_length(const DyadicCube& c) { return std::ldexp(1.0, -c.level); }
inline double cube_left(const DyadicCube& c) {
  return static_cast<double>(c.index) * cube_length(c);
}
inline double cube_right(const DyadicCube& c) {
  return static_cast<double>(c.index + 1) * cube_length(c);
}

inline std::pair<DyadicCube, DyadicCube> children(const DyadicCube& c) {
  validate_cube(c);
  require(c.level < kMaxLevel, "children: level overflow beyond configured maximum "
                               "(resolution error)");
  return {DyadicCube{c.level + 1, 2 * c.index},
          DyadicCube{c.level + 1, 2 * c.index + 1}};
}

inline DyadicCube parent(const DyadicCube& c) {
  validate_cube(c);
  require(c.level > 0, "parent: root cube has no parent");
  return DyadicCube{c.level - 1, c.index / 2};
}

inline bool contains(const DyadicCube& outer, const DyadicCube& inner) {
  if (inner.level < outer.level) return false;
  return (inner.index >> (inner.level - outer.level)) == outer.index;
}

inline std::size_t flat_index(const DyadicCube& c) {
  return (std::size_t{1} << c.level) + static_cast<std::size_t>(c.index);
}

inline DyadicCube cube_from_flat(std::size_t f) {
  require(f >= 1, "cube_from_flat: index must be >= 1");
  int level = 0;
  while ((std::size_t{2} << level) <= f) ++level;
  return DyadicCube{level, static_cast<std::int64_t>(f - (std::size_t{1} << level))};
}

// number of heap slots for all cubes with level <= depth (slot 0 unused)
inline std::size_t heap_size(int depth) { return std::size_t{2} << depth; }

struct VectorField {
  int dim = 0;
  int resolution = 0;
  std::vector<Vec> cells;  // 2^resolution entries

  static VectorField zero(int dim, int resolution) {
    require(resolution >= 0 && resolution <= kMaxLevel,
            "VectorField: resolution outside supported range");
    check_dim(dim, "VectorField");
    VectorField f;
    f.dim = dim;
    f.resolution = resolution;
    f.cells.assign(std::size_t{1} << resolution, Vec(dim));
    return f;
  }

  static VectorField constant(const Vec& v, int resolution) {
    VectorField f = zero(v.dim(), resolution);
    for (auto& c : f.cells) c = v;
    return f;
  }

  // cell averages from a closed-form averaging callable avg(a,b) over [a,b)
  static VectorField from_cell_averages(
      int dim, int resolution, const std::function<Vec(double, double)>& avg) {
    VectorField f = zero(dim, resolution);
    const double h = std::ldexp(1.0, -resolution);
    for (std::size_t c = 0; c < f.cells.size(); ++c)
      f.cells[c] = avg(static_cast<double>(c) * h, static_cast<double>(c + 1) * h);
    return f;
  }
};

struct MatrixSymbol {
  int dim = 0;
  int resolution = 0;
  std::vector<Mat> cells;

  static MatrixSymbol zero(int dim, int resolution) {
    require(resolution >= 0 && resolution <= kMaxLevel,
            "MatrixSymbol: resolution outside supported range");
    check_dim(dim, "MatrixSymbol");
    MatrixSymbol s;
    s.dim = dim;
    s.resolution = resolution;
    s.cells.assign(std::size_t{1} << resolution, Mat(dim));
    return s;
  }
};

// Haar function h_I = |I|^{-1/2} (chi_left - chi_right); left half positive.
inline VectorField haar_atom(int dim, int resolution, const DyadicCube& I, int component) {
  validate_cube(I);
  require(I.level < resolution, "haar_atom: cube at or below resolution");
  VectorField f = VectorField::zero(dim, resolution);
  const double amp = std::sqrt(std::ldexp(1.0, I.level));  // |I|^{-1/2}
  const std::size_t span = std::size_t{1} << (resolution - I.level);
  const std::size_t start = static_cast<std::size_t>(I.index) * span;
  for (std::size_t c = 0; c < span; ++c)
    f.cells[start + c][component] = (c < span / 2) ? amp : -amp;
  return f;
}

namespace detail {
// bottom-up heap of cell sums: sums[i] = sum of cells inside cube i
template <typename T>
std::vector<T> cell_sum_heap(const std::vector<T>& cells, int resolution, const T& zero) {
  std::vector<T> sums(heap_size(resolution), zero);
  const std::size_t base = std::size_t{1} << resolution;
  for (std::size_t c = 0; c < cells.size(); ++c) sums[base + c] = cells[c];
  for (std::size_t i = base - 1; i >= 1; --i) {
    T s = sums[2 * i];
    s += sums[2 * i + 1];
    sums[i] = s;
  }
  return sums;
}
}  // namespace detail

struct VecSpectrum {
  int dim = 0;
  int resolution = 0;
  Vec mean;
  std::vector<Vec> coeff;  // heap-indexed, defined for levels < resolution
};

struct MatSpectrum {
  int dim = 0;
  int resolution = 0;
  Mat mean;
  std::vector<Mat> coeff;
};

inline VecSpectrum analyze(const VectorField& f) {
  const auto sums = detail::cell_sum_heap(f.cells, f.resolution, Vec(f.dim));
  const double cell = std::ldexp(1.0, -f.resolution);
  VecSpectrum sp;
  sp.dim = f.dim;
  sp.resolution = f.resolution;
  sp.mean = sums[1] * cell;
  sp.coeff.assign(std::size_t{1} << f.resolution, Vec(f.dim));
  for (int lvl = 0; lvl < f.resolution; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    const double amp = std::sqrt(std::ldexp(1.0, lvl)) * cell;  // |I|^{-1/2} * dx
    for (std::size_t i = lo; i < 2 * lo; ++i)
      sp.coeff[i] = (sums[2 * i] - sums[2 * i + 1]) * amp;
  }
  return sp;
}

inline MatSpectrum analyze(const MatrixSymbol& b) {
  const auto sums = detail::cell_sum_heap(b.cells, b.resolution, Mat(b.dim));
  const double cell = std::ldexp(1.0, -b.resolution);
  MatSpectrum sp;
  sp.dim = b.dim;
  sp.resolution = b.resolution;
  sp.mean = sums[1] * cell;
  sp.coeff.assign(std::size_t{1} << b.resolution, Mat(b.dim));
  for (int lvl = 0; lvl < b.resolution; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    const double amp = std::sqrt(std::ldexp(1.0, lvl)) * cell;
    for (std::size_t i = lo; i < 2 * lo; ++i)
      sp.coeff[i] = (sums[2 * i] - sums[2 * i + 1]) * amp;
  }
  return sp;
}

inline VectorField synthesize(const VecSpectrum& sp) {
  VectorField f = VectorField::zero(sp.dim, sp.resolution);
  std::vector<Vec> acc(heap_size(sp.resolution), Vec(sp.dim));
  acc[1] = sp.mean;
  for (int lvl = 0; lvl < sp.resolution; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    const double amp = std::sqrt(std::ldexp(1.0, lvl));  // h_I value on left half
    for (std::size_t i = lo; i < 2 * lo; ++i) {
      const Vec step = sp.coeff[i] * amp;
      acc[2 * i] = acc[i] + step;
      acc[2 * i + 1] = acc[i] - step;
    }
  }
  const std::size_t base = std::size_t{1} << sp.resolution;
  for (std::size_t c = 0; c < f.cells.size(); ++c) f.cells[c] = acc[base + c];
  return f;
}

inline Vec haar_coefficient(const VectorField& f, const DyadicCube& I) {
  validate_cube(I);
  require(I.level < f.resolution,
          "haar_coefficient: cube at or below the sample resolution "
          "(insufficient-resolution error)");
  const std::size_t span = std::size_t{1} << (f.resolution - I.level);
  const std::size_t start = static_cast<std::size_t>(I.index) * span;
  Vec s(f.dim);
  for (std::size_t c = 0; c < span / 2; ++c) s += f.cells[start + c];
  for (std::size_t c = span / 2; c < span; ++c) s -= f.cells[start + c];
  const double cell = std::ldexp(1.0, -f.resolution);
  return s * (std::sqrt(std::ldexp(1.0, I.level)) * cell);
}

inline Vec average(const VectorField& f, const DyadicCube& I) {
  validate_cube(I);
  require(I.level <= f.resolution, "average: cube below the sample resolution");
  const std::size_t span = std::size_t{1} << (f.resolution - I.level);
  const std::size_t start = static_cast<std::size_t>(I.index) * span;
  Vec s(f.dim);
  for (std::size_t c = 0; c < span; ++c) s += f.cells[start + c];
  return s * (1.0 / static_cast<double>(span));
}

inline Mat average(const MatrixSymbol& b, const DyadicCube& I) {
  validate_cube(I);
  require(I.level <= b.resolution, "average: cube below the sample resolution");
  const std::size_t span = std::size_t{1} << (b.resolution - I.level);
  const std::size_t start = static_cast<std::size_t>(I.index) * span;
  Mat s(b.dim);
  for (std::size_t c = 0; c < span; ++c) s += b.cells[start + c];
  return s * (1.0 / static_cast<double>(span));
}

// heap of averages m_I f for every cube with level <= f.resolution
inline std::vector<Vec> average_table(const VectorField& f) {
  auto sums = detail::cell_sum_heap(f.cells, f.resolution, Vec(f.dim));
  for (int lvl = 0; lvl <= f.resolution; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    const double inv = std::ldexp(1.0, lvl - f.resolution);
    for (std::size_t i = lo; i < 2 * lo; ++i) sums[i] *= inv;
  }
  return sums;
}

// S(x) = ( sum_{I : level < depth} |V_I f_I|^2 |I|^{-1} chi_I(x) )^{1/2}
// V is looked up through a callable cube -> Mat (tables or lambdas).
inline VectorField square_function(const VectorField& f,
                                   const std::function<Mat(const DyadicCube&)>& V,
                                   int depth) {
  require(depth >= 0 && depth <= f.resolution,
          "square_function: depth must lie within the field resolution");
  const auto sp = analyze(f);
  std::vector<double> acc(heap_size(f.resolution), 0.0);
  for (int lvl = 0; lvl < depth; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    const double inv_len = std::ldexp(1.0, lvl);
    for (std::size_t i = lo; i < 2 * lo; ++i) {
      const DyadicCube I{lvl, static_cast<std::int64_t>(i - lo)};
      const Mat vi = V(I);
      require(vi.dim() == f.dim, "square_function: V_I has wrong dimension "
                                 "(incomplete-map error)");
      const Vec w = vi * sp.coeff[i];
      const double term = w.dot(w) * inv_len;
      acc[2 * i] += acc[i] + term;
      acc[2 * i + 1] += acc[i] + term;
    }
  }
  // levels >= depth inherit the accumulated path sums unchanged
  for (int lvl = depth; lvl < f.resolution; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    for (std::size_t i = lo; i < 2 * lo; ++i) {
      acc[2 * i] += acc[i];
      acc[2 * i + 1] += acc[i];
    }
  }
  VectorField s = VectorField::zero(1, f.resolution);
  const std::size_t base = std::size_t{1} << f.resolution;
  for (std::size_t c = 0; c < s.cells.size(); ++c)
    s.cells[c][0] = std::sqrt(acc[base + c]);
  return s;
}

inline double lp_norm(const VectorField& g, double p) {
  require(p > 1.0, "lp_norm: p must exceed 1");
  double acc = 0.0;
  for (const Vec& c : g.cells) acc += std::pow(c.norm(), p);
  return std::pow(acc * std::ldexp(1.0, -g.resolution), 1.0 / p);
}

inline double l2_distance(const VectorField& a, const VectorField& b) {
  require(a.dim == b.dim && a.resolution == b.resolution,
          "l2_distance: mismatched fields");
  double acc = 0.0;
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    Vec d = a.cells[c] - b.cells[c];
    acc += d.dot(d);
  }
  return std::sqrt(acc * std::ldexp(1.0, -a.resolution));
}

}  // namespace dyadicw
