#pragma once

// Small construction/comparison helpers shared by the unit suites.

#include <vector>

#include "dyadicw/linalg.hpp"
#include "dyadicw/rng.hpp"

namespace testutil {

using dyadicw::Mat;
using dyadicw::Rng;
using dyadicw::Vec;

inline Vec vec2(double a, double b) {
  Vec v(2);
  v[0] = a;
  v[1] = b;
  return v;
}

inline Vec vec3(double a, double b, double c) {
  Vec v(3);
  v[0] = a;
  v[1] = b;
  v[2] = c;
  return v;
}

inline Mat mat2(double a, double b, double c, double d) {
  Mat m(2);
  m(0, 0) = a;
  m(0, 1) = b;
  m(1, 0) = c;
  m(1, 1) = d;
  return m;
}

inline Mat random_mat(Rng& rng, int n, double scale = 1.0) {
  Mat m(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

inline Mat random_spd(Rng& rng, int n, double eps = 0.05) {
  Mat b = random_mat(rng, n);
  Mat s = b.transpose() * b;
  for (int i = 0; i < n; ++i) s(i, i) += eps;
  return s;
}

// orthonormal columns extracted from a random symmetric eigenbasis
inline Mat random_orthogonal(Rng& rng, int n) {
  Mat s = random_mat(rng, n);
  s = s + s.transpose();
  return dyadicw::eigen_sym(s).vectors;
}

inline double max_diff(const Mat& a, const Mat& b) { return (a - b).max_abs(); }

inline double max_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (int i = 0; i < a.dim(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_diff(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_diff(a[i], b[i]));
  return m;
}

}  // namespace testutil
