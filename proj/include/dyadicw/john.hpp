#pragma once

// John-ellipsoid fitting of norm balls. A norm rho is sampled on quasi-uniform
// sphere directions; the boundary points q_i = e_i/rho(e_i) are fed to a
// Khachiyan-style minimum-volume-enclosing-ellipsoid iteration (with
// Wolfe-Atwood away steps) in the centered/symmetric formulation
// P(u) = sum_i u_i q_i q_i^T. The returned V = P^{-1/2} satisfies
//   rho(e) <= |V e|              for every direction (the ellipsoid
//                                {x : x^T P^{-1} x <= 1} lies inside the
//                                convex hull of the samples for any simplex u),
//   |V e_i| <= sqrt(n(1+eps)) * rho(e_i)   on the sampled directions.

#include <cstdint>
#include <functional>
#include <vector>

#include "linalg.hpp"
#include "rng.hpp"

namespace dyadicw {

struct NormBallSample {
  int dim = 0;
  std::vector<Vec> directions;  // unit vectors, antipodally closed
  std::vector<double> radii;    // |q_i| = 1/rho(direction_i)
};

// Quasi-uniform unit directions, antipodally closed. n=2 uses equally spaced
// angles; n=3 a Fibonacci hemisphere plus antipodes; n=4 a deterministic
// low-discrepancy draw plus antipodes. n=1 is just {+1,-1}.
inline std::vector<Vec> sphere_directions(int n, int m) {
  check_dim(n, "sphere_directions");
  require(m >= 2 * n * n, "sphere_directions: need m >= 2n^2 directions");
  std::vector<Vec> dirs;
  dirs.reserve(static_cast<std::size_t>(m));
  if (n == 1) {
    Vec plus(1), minus(1);
    plus[0] = 1.0;
    minus[0] = -1.0;
    dirs.push_back(plus);
    dirs.push_back(minus);
    return dirs;
  }
  const int half = (m + 1) / 2;
  if (n == 2) {
    // half-circle angles; exact antipodes are appended below
    const double step = 3.1415926535897932384626433832795 / half;
    for (int k = 0; k < half; ++k) {
      Vec v(2);
      v[0] = std::cos(step * k);
      v[1] = std::sin(step * k);
      dirs.push_back(v);
    }
  } else if (n == 3) {
    const double golden = 2.39996322972865332;  // golden angle
    for (int k = 0; k < half; ++k) {
      const double z = ((2.0 * k + 1.0) / half - 1.0) * (1.0 - 1e-9);
      const double r = std::sqrt(std::max(1.0 - z * z, 0.0));
      const double a = golden * k;
      Vec v(3);
      v[0] = r * std::cos(a);
      v[1] = r * std::sin(a);
      v[2] = z;
      dirs.push_back(v);
    }
  } else {
    Rng rng(0x6A09E667F3BCC908ULL);  // fixed: directions are part of the convention
    for (int k = 0; k < half; ++k) {
      Vec v(n);
      double norm = 0.0;
      do {
        for (int i = 0; i < n; ++i) v[i] = rng.normal();
        norm = v.norm();
      } while (norm < 1e-6);
      v *= 1.0 / norm;
      dirs.push_back(v);
    }
  }
  const std::size_t count = dirs.size();
  for (std::size_t k = 0; k < count; ++k) dirs.push_back(dirs[k] * -1.0);
  return dirs;
}

struct MveeResult {
  Mat V;                        // P^{-1/2}
  double ratio_max = 0.0;       // max_i |V q_i|  (upper sandwich on samples)
  double ratio_min = 0.0;       // min_i |V q_i|  (>= 1 up to fp)
  int iterations = 0;
  std::vector<double> weights;  // final simplex weights (warm-start handle)
};

struct MveeOptions {
  double eps = 1e-7;
  int max_iter = 200000;
};

// Centered MVEE of the point set {±q_i}. `warm` may carry simplex weights
// from a nearby problem (e.g. the parent cube); any valid simplex works.
inline MveeResult mvee_centered(const std::vector<Vec>& points,
                                const MveeOptions& opts = {},
                                const std::vector<double>* warm = nullptr) {
  const std::size_t m = points.size();
  require(m >= 2, "mvee_centered: need at least 2 points");
  const int n = points[0].dim();

  std::vector<double> u;
  if (warm && warm->size() == m) {
    u = *warm;
    double s = 0.0;
    for (double w : u) s += (w >= 0.0 ? w : 0.0);
    if (s > 0.0) {
      for (double& w : u) w = std::max(w, 0.0) / s;
    } else {
      u.assign(m, 1.0 / static_cast<double>(m));
    }
  } else {
    u.assign(m, 1.0 / static_cast<double>(m));
  }

  Mat p(n);
  auto rebuild_p = [&] {
    p = Mat(n);
    for (std::size_t i = 0; i < m; ++i) {
      if (u[i] == 0.0) continue;
      const Vec& q = points[i];
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) p(r, c) += u[i] * q[r] * q[c];
    }
  };
  rebuild_p();

  Mat pinv(n);
  std::vector<double> kappa(m, 0.0);
  int iter = 0;
  const double target_hi = n * (1.0 + opts.eps);
  const double target_lo = n * (1.0 - opts.eps);
  // Near-ellipsoidal samples make the exact optimum unreachable in reasonable
  // time (support pruning gains O(delta^2) per step). When a whole window of
  // iterations moves log det by less than fp noise while the enclosure is
  // already certified to 1e-4, stop and report the measured ratio instead.
  const double relaxed_hi = n * (1.0 + 1e-4);
  double window_gain = 0.0;
  bool done = false;

  for (; iter < opts.max_iter; ++iter) {
    if (det(p) <= 0.0) fail("mvee_centered: degenerate sample set (fitting error)");
    pinv = inverse(p);
    std::size_t hi_idx = 0, lo_idx = m;
    double hi = -1.0, lo = 1e300;
    for (std::size_t i = 0; i < m; ++i) {
      const Vec& q = points[i];
      double k = 0.0;
      for (int r = 0; r < n; ++r) {
        double s = 0.0;
        for (int c = 0; c < n; ++c) s += pinv(r, c) * q[c];
        k += q[r] * s;
      }
      kappa[i] = k;
      if (k > hi) { hi = k; hi_idx = i; }
      if (u[i] > 1e-12 && k < lo) { lo = k; lo_idx = i; }
    }
    const bool hi_ok = hi <= target_hi;
    const bool lo_ok = lo_idx == m || lo >= target_lo;
    if (hi_ok && lo_ok) { done = true; break; }
    if (iter > 0 && (iter & 255) == 0) {
      if (window_gain < 1e-8 && hi <= relaxed_hi) { done = true; break; }
      window_gain = 0.0;
      rebuild_p();  // shed rank-1 update drift
      pinv = inverse(p);
    }

    // choose the more violated side (Wolfe-Atwood)
    const double add_gain = hi - n;
    const double away_gain = (lo_idx == m) ? -1.0 : (n - lo);
    std::size_t idx;
    double tau;
    if (add_gain >= away_gain) {
      idx = hi_idx;
      tau = (hi - n) / (n * (hi - 1.0));
    } else {
      idx = lo_idx;
      const double full = -u[lo_idx] / std::max(1.0 - u[lo_idx], 1e-300);
      // for kappa <= 1 the objective improves all the way to full removal;
      // the stationary-point formula would flip sign there
      tau = (lo <= 1.0 + 1e-14) ? full
                                : std::max((lo - n) / (n * (lo - 1.0)), full);
    }
    const double kap = kappa[idx];
    window_gain += (n - 1) * std::log1p(-tau) + std::log(1.0 - tau + tau * kap);
    for (std::size_t i = 0; i < m; ++i) u[i] *= (1.0 - tau);
    u[idx] += tau;
    if (u[idx] < 1e-15) u[idx] = 0.0;
    const Vec& q = points[idx];
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        p(r, c) = (1.0 - tau) * p(r, c) + tau * q[r] * q[c];
  }
  if (!done)
    fail("mvee_centered: no convergence within iteration cap (fitting error)");

  MveeResult res;
  res.V = spd_power(p, -0.5);
  res.iterations = iter;
  res.weights = std::move(u);
  double hi = 0.0, lo = 1e300;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = std::sqrt(std::max(kappa[i], 0.0));
    hi = std::max(hi, r);
    lo = std::min(lo, r);
  }
  res.ratio_max = hi;
  res.ratio_min = lo;
  return res;
}

struct JohnResult {
  Mat V;
  NormBallSample sample;
  double sandwich_ratio = 0.0;  // max_i |V e_i| / rho(e_i)
  int iterations = 0;
};

// Fits V to a norm given only an evaluator. m >= 2n^2 directions.
inline JohnResult john_ellipsoid(const std::function<double(const Vec&)>& rho,
                                 int n, int m, const MveeOptions& opts = {}) {
  const auto dirs = sphere_directions(n, m);
  NormBallSample sample;
  sample.dim = n;
  sample.directions = dirs;
  sample.radii.reserve(dirs.size());
  std::vector<Vec> points;
  points.reserve(dirs.size());
  for (const Vec& e : dirs) {
    const double r = rho(e);
    require(std::isfinite(r) && r > 0.0,
            "john_ellipsoid: rho must be positive and finite on every direction");
    sample.radii.push_back(1.0 / r);
    points.push_back(e * (1.0 / r));
  }
  // homogeneity spot check: rho(2e) = 2 rho(e)
  {
    const Vec& e = dirs[0];
    const double r1 = rho(e), r2 = rho(e * 2.0);
    require(std::abs(r2 - 2.0 * r1) <= 1e-6 * std::max(r2, r1),
            "john_ellipsoid: rho is not homogeneous");
  }
  auto mv = mvee_centered(points, opts);
  JohnResult res;
  res.V = mv.V;
  res.sample = std::move(sample);
  res.sandwich_ratio = mv.ratio_max;
  res.iterations = mv.iterations;
  return res;
}

}  // namespace dyadicw
