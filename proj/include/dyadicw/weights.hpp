#pragma once

// Matrix weights on [0,1) stored as exact per-cell averages of closed forms,
// reducing operators V_I / V_I' (exact at p=2, exact for scalars and for
// locally constant weights, John-ellipsoid fitted otherwise), and the matrix
// A_p characteristic in both the reducing-operator and double-integral forms.

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "dyadic.hpp"
#include "john.hpp"
#include "linalg.hpp"
#include "threading.hpp"

namespace dyadicw {

inline double dual_exponent(double p) {
  require(p > 1.0, "dual exponent: p must exceed 1");
  return p / (p - 1.0);
}

// exact average of x^gamma over [a,b] (gamma > -1 so the first cell is finite)
inline double power_cell_average(double gamma, double a, double b) {
  if (gamma == 0.0) return 1.0;
  require(gamma > -1.0, "power_cell_average: exponent <= -1 is not integrable");
  return (std::pow(b, gamma + 1.0) - std::pow(a, gamma + 1.0)) /
         ((gamma + 1.0) * (b - a));
}

// exact average of log x over [a,b]
inline double log_cell_average(double a, double b) {
  const double upper = b * std::log(b) - b;
  const double lower = (a == 0.0) ? 0.0 : a * std::log(a) - a;
  return (upper - lower) / (b - a);
}

enum class WeightFamily { power_diag, rotated_power, scalar_power, custom };

inline const char* family_name(WeightFamily f) {
  switch (f) {
    case WeightFamily::power_diag: return "power_diag";
    case WeightFamily::rotated_power: return "rotated_power";
    case WeightFamily::scalar_power: return "scalar";
    default: return "custom";
  }
}

struct MatrixWeight {
  int dim = 0;
  int resolution = 0;
  WeightFamily family = WeightFamily::custom;
  std::vector<double> exponents;  // closed-form power exponents, when known
  double theta = 0.0;             // rotation angle for rotated_power
  double validated_p = 0.0;       // p used for the admissibility check
  std::string sampler_tag;
  std::vector<Mat> cells;
};

// Admissibility of the power families: every listed exponent (and for the
// diagonal family also its negative) must lie strictly inside (-1, p-1).
// Violations are named so config errors read back meaningfully.
inline void check_power_admissible(const std::vector<double>& exps, double p,
                                   bool symmetric_box, const char* what) {
  require(p > 1.0, std::string(what) + ": p must exceed 1");
  auto check_one = [&](double g, const std::string& label) {
    if (!(g > -1.0))
      fail(std::string(what) + ": inadmissible exponent, " + label + " = " +
           std::to_string(g) + " violates -1 < " + label);
    if (!(g < p - 1.0))
      fail(std::string(what) + ": inadmissible exponent, " + label + " = " +
           std::to_string(g) + " violates " + label + " < p-1 = " +
           std::to_string(p - 1.0));
  };
  const char* names[] = {"alpha", "beta", "gamma", "delta"};
  for (std::size_t i = 0; i < exps.size(); ++i) {
    const std::string nm = i < 4 ? names[i] : ("exponent" + std::to_string(i));
    check_one(exps[i], nm);
    if (symmetric_box) check_one(-exps[i], "-" + nm);
  }
}

inline void check_weight_admissible(const MatrixWeight& w, double p) {
  switch (w.family) {
    case WeightFamily::power_diag:
    case WeightFamily::rotated_power:
      check_power_admissible(w.exponents, p, true, "power weight");
      return;
    case WeightFamily::scalar_power:
      check_power_admissible(w.exponents, p, false, "scalar weight");
      return;
    default:
      return;  // custom weights carry no closed-form guarantee
  }
}

// W(x) = diag(x^alpha, x^beta) with the symmetric admissibility box.
inline MatrixWeight make_power_weight(double alpha, double beta, double p, int L) {
  check_power_admissible({alpha, beta}, p, true, "power weight");
  require(L >= 0 && L <= kMaxLevel, "power weight: resolution outside [0,24]");
  MatrixWeight w;
  w.dim = 2;
  w.resolution = L;
  w.family = WeightFamily::power_diag;
  w.exponents = {alpha, beta};
  w.validated_p = p;
  w.sampler_tag = "power_diag";
  w.cells.reserve(std::size_t{1} << L);
  const double h = std::ldexp(1.0, -L);
  for (std::size_t c = 0; c < (std::size_t{1} << L); ++c) {
    const double a = static_cast<double>(c) * h;
    const double b = static_cast<double>(c + 1) * h;
    Mat m(2);
    m(0, 0) = power_cell_average(alpha, a, b);
    m(1, 1) = power_cell_average(beta, a, b);
    w.cells.push_back(m);
  }
  return w;
}

// scalar family w(x) = x^alpha (n = 1); admissibility -1 < alpha < p-1
inline MatrixWeight make_scalar_weight(double alpha, double p, int L) {
  check_power_admissible({alpha}, p, false, "scalar weight");
  require(L >= 0 && L <= kMaxLevel, "scalar weight: resolution outside [0,24]");
  MatrixWeight w;
  w.dim = 1;
  w.resolution = L;
  w.family = WeightFamily::scalar_power;
  w.exponents = {alpha};
  w.validated_p = p;
  w.sampler_tag = "scalar";
  w.cells.reserve(std::size_t{1} << L);
  const double h = std::ldexp(1.0, -L);
  for (std::size_t c = 0; c < (std::size_t{1} << L); ++c) {
    Mat m(1);
    m(0, 0) = power_cell_average(alpha, static_cast<double>(c) * h,
                                 static_cast<double>(c + 1) * h);
    w.cells.push_back(m);
  }
  return w;
}

inline MatrixWeight make_identity_weight(int n, int L) {
  check_dim(n, "identity weight");
  require(L >= 0 && L <= kMaxLevel, "identity weight: resolution outside [0,24]");
  MatrixWeight w;
  w.dim = n;
  w.resolution = L;
  w.family = WeightFamily::power_diag;
  w.exponents.assign(static_cast<std::size_t>(n), 0.0);
  w.validated_p = 2.0;
  w.sampler_tag = "identity";
  w.cells.assign(std::size_t{1} << L, Mat::identity(n));
  return w;
}

inline MatrixWeight make_rotated_weight(const MatrixWeight& base, double theta) {
  require(base.dim == 2, "rotated weight: base must be 2x2");
  MatrixWeight w = base;
  w.family = WeightFamily::rotated_power;
  w.theta = theta;
  w.sampler_tag = "rotated(" + base.sampler_tag + ")";
  const Mat r = Mat::rotation2(theta);
  const Mat rt = r.transpose();
  for (auto& cell : w.cells) cell = rt * cell * r;
  return w;
}

inline MatrixSymbol weight_power_field(const MatrixWeight& w, double t) {
  MatrixSymbol s = MatrixSymbol::zero(w.dim, w.resolution);
  parallel_for(w.cells.size(), [&](std::size_t c) {
    s.cells[c] = (t == 1.0) ? w.cells[c] : spd_power(w.cells[c], t);
  });
  return s;
}

inline MatrixWeight dual_weight(const MatrixWeight& w, double p) {
  const double pp = dual_exponent(p);
  MatrixWeight d;
  d.dim = w.dim;
  d.resolution = w.resolution;
  d.family = w.family;
  d.theta = w.theta;
  d.validated_p = pp;
  d.sampler_tag = "dual(" + w.sampler_tag + ")";
  d.exponents = w.exponents;
  for (double& g : d.exponents) g *= (1.0 - pp);
  d.cells.resize(w.cells.size());
  parallel_for(w.cells.size(), [&](std::size_t c) {
    d.cells[c] = spd_power(w.cells[c], 1.0 - pp);
  });
  return d;
}

enum class Exactness : std::uint8_t {
  exact_p2 = 0,
  exact_scalar = 1,
  exact_constant = 2,
  john_approx = 3,
};

inline const char* exactness_name(Exactness e) {
  switch (e) {
    case Exactness::exact_p2: return "exact_p2";
    case Exactness::exact_scalar: return "exact_scalar";
    case Exactness::exact_constant: return "exact_constant";
    default: return "john_approx";
  }
}

struct JohnTableOptions {
  int directions = 256;
  double eps = 1e-7;
  int max_iter = 200000;
};

// Reducing operators for every cube with level <= depth, heap-indexed.
// `exponent` records the Lebesgue exponent of the defining average
// (p for V, p' for V'); `dual` marks V' tables.
struct ReducingTable {
  int dim = 0;
  int depth = 0;
  double exponent = 0.0;
  bool dual = false;
  std::vector<Mat> V;
  std::vector<double> sandwich;     // max_i |V e_i| / rho(e_i), 1.0 on exact paths
  std::vector<std::uint8_t> tags;   // Exactness per cube

  const Mat& at(const DyadicCube& c) const {
    validate_cube(c);
    require(c.level <= depth, "reducing table: cube deeper than table depth "
                              "(incomplete-map error)");
    return V[flat_index(c)];
  }
  Exactness tag_at(const DyadicCube& c) const {
    return static_cast<Exactness>(tags[flat_index(c)]);
  }
};

namespace detail {

// John-fitted table for a general power field P (= W^{1/p} or W^{-1/p}):
// rho_I(e)^q = m_I |P(x)e|^q. Subtree-blocked so per-direction sums are
// computed once (bottom-up) while MVEE warm starts flow top-down.
inline void build_john_cells(const std::vector<Mat>& pcells, int L, double q,
                             int depth, const JohnTableOptions& opts,
                             ReducingTable& out) {
  const int n = pcells.empty() ? 0 : pcells[0].dim();
  const auto dirs = sphere_directions(n, opts.directions);
  const std::size_t m = dirs.size();
  const MveeOptions mvopts{opts.eps, opts.max_iter};

  const int split = std::max(0, depth - 9);
  const std::size_t n_sub = std::size_t{1} << split;
  // per-subtree-root aggregates fed to the upper sweep
  std::vector<std::vector<double>> root_sums(n_sub);
  std::vector<std::uint8_t> root_const(n_sub, 0);
  std::vector<Mat> root_cval(n_sub, Mat(n));

  struct Scratch {
    std::vector<double> s;       // local heap x m
    std::vector<std::uint8_t> cflag;
    std::vector<Mat> cval;
    std::vector<std::vector<double>> warm;
    std::vector<Vec> points;
  };

  auto solve_cube = [&](std::size_t gflat, const std::vector<double>* s,
                        bool is_const, const Mat& cval,
                        const std::vector<double>* warm_u, Scratch* scr,
                        std::vector<double>* u_out) {
    if (is_const) {
      out.V[gflat] = cval;
      out.sandwich[gflat] = 1.0;
      out.tags[gflat] = static_cast<std::uint8_t>(Exactness::exact_constant);
      if (u_out) u_out->assign(m, 1.0 / static_cast<double>(m));
      return;
    }
    const DyadicCube c = cube_from_flat(gflat);
    const double count = std::ldexp(1.0, L - c.level);
    auto& pts = scr->points;
    pts.clear();
    for (std::size_t i = 0; i < m; ++i) {
      const double rho = std::pow((*s)[i] / count, 1.0 / q);
      require(std::isfinite(rho) && rho > 0.0,
              "reducing table: degenerate norm sample (fitting error)");
      pts.push_back(dirs[i] * (1.0 / rho));
    }
    auto mv = mvee_centered(pts, mvopts, warm_u);
    out.V[gflat] = mv.V;
    out.sandwich[gflat] = mv.ratio_max;
    out.tags[gflat] = static_cast<std::uint8_t>(Exactness::john_approx);
    if (u_out) *u_out = std::move(mv.weights);
  };

  parallel_for(n_sub, [&](std::size_t sub) {
    const std::size_t groot = n_sub + sub;  // global flat index at level `split`
    const int h = depth - split;
    const std::size_t lheap = std::size_t{2} << h;
    Scratch scr;
    scr.s.assign(lheap * m, 0.0);
    scr.cflag.assign(lheap, 0);
    scr.cval.assign(lheap, Mat(n));
    scr.warm.assign(lheap, {});

    // leaves: scan cells of each level-`depth` cube inside this subtree
    const std::size_t lbase = std::size_t{1} << h;
    const int span_bits = L - depth;
    for (std::size_t l = lbase; l < 2 * lbase; ++l) {
      const std::size_t gidx = ((groot << h) | (l - lbase)) -
                               (std::size_t{1} << depth);  // cell-block index
      const std::size_t c0 = gidx << span_bits;
      const std::size_t c1 = c0 + (std::size_t{1} << span_bits);
      bool cst = true;
      for (std::size_t c = c0 + 1; c < c1 && cst; ++c)
        cst = (pcells[c] == pcells[c0]);
      scr.cflag[l] = cst ? 1 : 0;
      if (cst) scr.cval[l] = pcells[c0];
      double* dst = scr.s.data() + l * m;
      for (std::size_t c = c0; c < c1; ++c) {
        const Mat& pc = pcells[c];
        for (std::size_t i = 0; i < m; ++i)
          dst[i] += std::pow((pc * dirs[i]).norm(), q);
      }
    }
    // internal nodes: pairwise sums, constancy propagation
    for (std::size_t l = lbase - 1; l >= 1; --l) {
      const double* a = scr.s.data() + 2 * l * m;
      const double* b = scr.s.data() + (2 * l + 1) * m;
      double* dst = scr.s.data() + l * m;
      for (std::size_t i = 0; i < m; ++i) dst[i] = a[i] + b[i];
      scr.cflag[l] = scr.cflag[2 * l] && scr.cflag[2 * l + 1] &&
                     (scr.cval[2 * l] == scr.cval[2 * l + 1]);
      if (scr.cflag[l]) scr.cval[l] = scr.cval[2 * l];
    }
    // top-down MVEE: subtree root cold, children warm from parent
    for (std::size_t l = 1; l < 2 * lbase; ++l) {
      int llev = 0;
      while ((std::size_t{2} << llev) <= l) ++llev;
      const std::size_t gflat = (groot << llev) | (l - (std::size_t{1} << llev));
      std::vector<double> sl(scr.s.begin() + static_cast<std::ptrdiff_t>(l * m),
                             scr.s.begin() + static_cast<std::ptrdiff_t>((l + 1) * m));
      const std::vector<double>* warm = (l >= 2) ? &scr.warm[l / 2] : nullptr;
      solve_cube(gflat, &sl, scr.cflag[l] != 0, scr.cval[l], warm, &scr,
                 &scr.warm[l]);
    }
    root_sums[sub].assign(scr.s.begin() + static_cast<std::ptrdiff_t>(m),
                          scr.s.begin() + static_cast<std::ptrdiff_t>(2 * m));
    root_const[sub] = scr.cflag[1];
    root_cval[sub] = scr.cval[1];
  });

  if (split > 0) {
    // aggregate sums/constancy for levels < split, then sweep top-down
    const std::size_t uheap = std::size_t{2} << split;
    std::vector<std::vector<double>> us(uheap);
    std::vector<std::uint8_t> uconst(uheap, 0);
    std::vector<Mat> ucval(uheap, Mat(n));
    for (std::size_t sub = 0; sub < n_sub; ++sub) {
      us[n_sub + sub] = root_sums[sub];
      uconst[n_sub + sub] = root_const[sub];
      ucval[n_sub + sub] = root_cval[sub];
    }
    for (std::size_t l = n_sub - 1; l >= 1; --l) {
      us[l].assign(m, 0.0);
      for (std::size_t i = 0; i < m; ++i) us[l][i] = us[2 * l][i] + us[2 * l + 1][i];
      uconst[l] = uconst[2 * l] && uconst[2 * l + 1] && (ucval[2 * l] == ucval[2 * l + 1]);
      if (uconst[l]) ucval[l] = ucval[2 * l];
    }
    Scratch scr;
    std::vector<std::vector<double>> uwarm(uheap);
    for (std::size_t l = 1; l < n_sub; ++l) {
      const std::vector<double>* warm = (l >= 2) ? &uwarm[l / 2] : nullptr;
      solve_cube(l, &us[l], uconst[l] != 0, ucval[l], warm, &scr, &uwarm[l]);
    }
  }
}

inline void build_scalar_cells(const std::vector<double>& s_cells, int L,
                               double q, int depth, ReducingTable& out) {
  auto sums = cell_sum_heap(s_cells, L, 0.0);
  for (int lvl = 0; lvl <= depth; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    const double inv_count = std::ldexp(1.0, lvl - L);
    for (std::size_t i = lo; i < 2 * lo; ++i) {
      Mat v(1);
      v(0, 0) = std::pow(sums[i] * inv_count, 1.0 / q);
      out.V[i] = v;
      out.sandwich[i] = 1.0;
      out.tags[i] = static_cast<std::uint8_t>(Exactness::exact_scalar);
    }
  }
}

inline void build_p2_cells(const std::vector<Mat>& wcells, int L, int depth,
                           ReducingTable& out) {
  const int n = wcells.empty() ? 0 : wcells[0].dim();
  auto sums = cell_sum_heap(wcells, L, Mat(n));
  std::vector<std::size_t> idx;
  idx.reserve(heap_size(depth));
  for (int lvl = 0; lvl <= depth; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    for (std::size_t i = lo; i < 2 * lo; ++i) idx.push_back(i);
  }
  parallel_for(idx.size(), [&](std::size_t k) {
    const std::size_t i = idx[k];
    int lvl = 0;
    while ((std::size_t{2} << lvl) <= i) ++lvl;
    const double inv_count = std::ldexp(1.0, lvl - L);
    out.V[i] = spd_power(sums[i] * inv_count, 0.5);
    out.sandwich[i] = 1.0;
    out.tags[i] = static_cast<std::uint8_t>(Exactness::exact_p2);
  });
}

}  // namespace detail

inline ReducingTable build_reducing_table(const MatrixWeight& w, double p,
                                          int depth,
                                          const JohnTableOptions& opts = {}) {
  require(p > 1.0, "reducing table: p must exceed 1");
  require(depth >= 0 && depth <= w.resolution - 2,
          "reducing table: depth must satisfy depth <= resolution - 2 "
          "(at least 4 cells per cube)");
  check_weight_admissible(w, p);
  ReducingTable t;
  t.dim = w.dim;
  t.depth = depth;
  t.exponent = p;
  t.dual = false;
  t.V.assign(heap_size(depth), Mat(w.dim));
  t.sandwich.assign(heap_size(depth), 0.0);
  t.tags.assign(heap_size(depth), 0);
  if (w.dim == 1) {
    std::vector<double> s(w.cells.size());
    for (std::size_t c = 0; c < s.size(); ++c) s[c] = w.cells[c](0, 0);
    detail::build_scalar_cells(s, w.resolution, p, depth, t);
  } else if (p == 2.0) {
    detail::build_p2_cells(w.cells, w.resolution, depth, t);
  } else {
    const MatrixSymbol pf = weight_power_field(w, 1.0 / p);
    detail::build_john_cells(pf.cells, w.resolution, p, depth, opts, t);
  }
  return t;
}

inline ReducingTable build_dual_reducing_table(const MatrixWeight& w, double p,
                                               int depth,
                                               const JohnTableOptions& opts = {}) {
  require(p > 1.0, "dual reducing table: p must exceed 1");
  require(depth >= 0 && depth <= w.resolution - 2,
          "dual reducing table: depth must satisfy depth <= resolution - 2");
  check_weight_admissible(w, p);
  const double pp = dual_exponent(p);
  ReducingTable t;
  t.dim = w.dim;
  t.depth = depth;
  t.exponent = pp;
  t.dual = true;
  t.V.assign(heap_size(depth), Mat(w.dim));
  t.sandwich.assign(heap_size(depth), 0.0);
  t.tags.assign(heap_size(depth), 0);
  if (w.dim == 1) {
    std::vector<double> s(w.cells.size());
    for (std::size_t c = 0; c < s.size(); ++c)
      s[c] = std::pow(w.cells[c](0, 0), -pp / p);
    detail::build_scalar_cells(s, w.resolution, pp, depth, t);
  } else if (p == 2.0) {
    std::vector<Mat> winv(w.cells.size(), Mat(w.dim));
    parallel_for(w.cells.size(), [&](std::size_t c) { winv[c] = inverse(w.cells[c]); });
    detail::build_p2_cells(winv, w.resolution, depth, t);
  } else {
    const MatrixSymbol pf = weight_power_field(w, -1.0 / p);
    detail::build_john_cells(pf.cells, w.resolution, pp, depth, opts, t);
  }
  return t;
}

struct ReducingPair {
  DyadicCube cube;
  Mat V;
  Mat V_dual;
  Exactness exactness = Exactness::john_approx;
  double sandwich_ratio = 1.0;
};

inline Mat reducing_operator(const MatrixWeight& w, const DyadicCube& I, double p,
                             const JohnTableOptions& opts = {}) {
  validate_cube(I);
  require(I.level <= w.resolution - 2,
          "reducing_operator: cube level must be <= resolution - 2");
  check_weight_admissible(w, p);
  const std::size_t span = std::size_t{1} << (w.resolution - I.level);
  const std::size_t start = static_cast<std::size_t>(I.index) * span;
  if (w.dim == 1) {
    double s = 0.0;
    for (std::size_t c = start; c < start + span; ++c) s += w.cells[c](0, 0);
    Mat v(1);
    v(0, 0) = std::pow(s / static_cast<double>(span), 1.0 / p);
    return v;
  }
  if (p == 2.0) {
    Mat s(w.dim);
    for (std::size_t c = start; c < start + span; ++c) s += w.cells[c];
    return spd_power(s * (1.0 / static_cast<double>(span)), 0.5);
  }
  bool cst = true;
  for (std::size_t c = start + 1; c < start + span && cst; ++c)
    cst = (w.cells[c] == w.cells[start]);
  if (cst) return spd_power(w.cells[start], 1.0 / p);
  std::vector<Mat> pcells(span, Mat(w.dim));
  for (std::size_t c = 0; c < span; ++c)
    pcells[c] = spd_power(w.cells[start + c], 1.0 / p);
  auto rho = [&](const Vec& e) {
    double acc = 0.0;
    for (const Mat& pc : pcells) acc += std::pow((pc * e).norm(), p);
    return std::pow(acc / static_cast<double>(span), 1.0 / p);
  };
  return john_ellipsoid(rho, w.dim, opts.directions,
                        MveeOptions{opts.eps, opts.max_iter}).V;
}

inline Mat dual_reducing_operator(const MatrixWeight& w, const DyadicCube& I,
                                  double p, const JohnTableOptions& opts = {}) {
  validate_cube(I);
  require(I.level <= w.resolution - 2,
          "dual_reducing_operator: cube level must be <= resolution - 2");
  check_weight_admissible(w, p);
  const double pp = dual_exponent(p);
  const std::size_t span = std::size_t{1} << (w.resolution - I.level);
  const std::size_t start = static_cast<std::size_t>(I.index) * span;
  if (w.dim == 1) {
    double s = 0.0;
    for (std::size_t c = start; c < start + span; ++c)
      s += std::pow(w.cells[c](0, 0), -pp / p);
    Mat v(1);
    v(0, 0) = std::pow(s / static_cast<double>(span), 1.0 / pp);
    return v;
  }
  if (p == 2.0) {
    Mat s(w.dim);
    for (std::size_t c = start; c < start + span; ++c) s += inverse(w.cells[c]);
    return spd_power(s * (1.0 / static_cast<double>(span)), 0.5);
  }
  bool cst = true;
  for (std::size_t c = start + 1; c < start + span && cst; ++c)
    cst = (w.cells[c] == w.cells[start]);
  if (cst) return spd_power(w.cells[start], -1.0 / p);
  std::vector<Mat> pcells(span, Mat(w.dim));
  for (std::size_t c = 0; c < span; ++c)
    pcells[c] = spd_power(w.cells[start + c], -1.0 / p);
  auto rho = [&](const Vec& e) {
    double acc = 0.0;
    for (const Mat& pc : pcells) acc += std::pow((pc * e).norm(), pp);
    return std::pow(acc / static_cast<double>(span), 1.0 / pp);
  };
  return john_ellipsoid(rho, w.dim, opts.directions,
                        MveeOptions{opts.eps, opts.max_iter}).V;
}

inline ReducingPair reducing_pair(const MatrixWeight& w, const DyadicCube& I,
                                  double p, const JohnTableOptions& opts = {}) {
  ReducingPair pr;
  pr.cube = I;
  pr.V = reducing_operator(w, I, p, opts);
  pr.V_dual = dual_reducing_operator(w, I, p, opts);
  if (w.dim == 1) {
    pr.exactness = Exactness::exact_scalar;
    pr.sandwich_ratio = 1.0;
  } else if (p == 2.0) {
    pr.exactness = Exactness::exact_p2;
    pr.sandwich_ratio = 1.0;
  } else {
    const std::size_t span = std::size_t{1} << (w.resolution - I.level);
    const std::size_t start = static_cast<std::size_t>(I.index) * span;
    bool cst = true;
    for (std::size_t c = start + 1; c < start + span && cst; ++c)
      cst = (w.cells[c] == w.cells[start]);
    pr.exactness = cst ? Exactness::exact_constant : Exactness::john_approx;
    pr.sandwich_ratio = 1.0;
    if (!cst) {
      // measured upper sandwich over a fresh direction grid
      const auto dirs = sphere_directions(w.dim, opts.directions);
      std::vector<Mat> pcells(span, Mat(w.dim));
      for (std::size_t c = 0; c < span; ++c)
        pcells[c] = spd_power(w.cells[start + c], 1.0 / p);
      double worst = 0.0;
      for (const Vec& e : dirs) {
        double acc = 0.0;
        for (const Mat& pc : pcells) acc += std::pow((pc * e).norm(), p);
        const double rho = std::pow(acc / static_cast<double>(span), 1.0 / p);
        worst = std::max(worst, (pr.V * e).norm() / rho);
      }
      pr.sandwich_ratio = worst;
    }
  }
  return pr;
}

// Write-once concurrent memo of reducing pairs for one (weight, p); racing
// writers compute identical values, the first insert wins.
class ReducingCache {
 public:
  ReducingCache(const MatrixWeight& w, double p, JohnTableOptions opts = {})
      : w_(&w), p_(p), opts_(opts) {}

  const ReducingPair& get(const DyadicCube& I) {
    const std::size_t key = flat_index(I);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = map_.find(key);
      if (it != map_.end()) return it->second;
    }
    ReducingPair fresh = reducing_pair(*w_, I, p_, opts_);
    std::lock_guard<std::mutex> lock(mu_);
    return map_.emplace(key, std::move(fresh)).first->second;
  }

 private:
  const MatrixWeight* w_;
  double p_;
  JohnTableOptions opts_;
  std::mutex mu_;
  std::unordered_map<std::size_t, ReducingPair> map_;
};

inline Mat avg_inverse_root(const MatrixWeight& w, const DyadicCube& I, double p) {
  validate_cube(I);
  require(I.level <= w.resolution, "avg_inverse_root: resolution check failed");
  const std::size_t span = std::size_t{1} << (w.resolution - I.level);
  const std::size_t start = static_cast<std::size_t>(I.index) * span;
  Mat s(w.dim);
  for (std::size_t c = start; c < start + span; ++c)
    s += spd_power(w.cells[c], -1.0 / p);
  return s * (1.0 / static_cast<double>(span));
}

struct ApCharacteristic {
  double norm_max = 0.0;    // sup ||V_I V_I'||
  double powp_max = 0.0;    // sup ||V_I V_I'||^p   (stopping-time convention)
  DyadicCube attaining;
  std::vector<double> per_depth;  // prefix max of powp by level (saturation curve)
};

inline ApCharacteristic ap_characteristic_reducing(const ReducingTable& vt,
                                                   const ReducingTable& vdt,
                                                   double p) {
  require(vt.depth == vdt.depth && vt.dim == vdt.dim,
          "ap_characteristic_reducing: mismatched tables");
  ApCharacteristic ch;
  ch.per_depth.assign(static_cast<std::size_t>(vt.depth) + 1, 0.0);
  double best = -1.0;
  for (int lvl = 0; lvl <= vt.depth; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    double lvl_best = 0.0;
    for (std::size_t i = lo; i < 2 * lo; ++i) {
      const double nm = op_norm(vt.V[i] * vdt.V[i]);
      if (nm > lvl_best) lvl_best = nm;
      if (nm > best) {
        best = nm;
        ch.attaining = cube_from_flat(i);
      }
    }
    const double prev = lvl > 0 ? ch.per_depth[static_cast<std::size_t>(lvl) - 1] : 0.0;
    ch.per_depth[static_cast<std::size_t>(lvl)] =
        std::max(prev, std::pow(lvl_best, p));
  }
  ch.norm_max = best;
  ch.powp_max = std::pow(best, p);
  return ch;
}

inline ApCharacteristic ap_characteristic_reducing(const MatrixWeight& w, double p,
                                                   int depth,
                                                   const JohnTableOptions& opts = {}) {
  const auto vt = build_reducing_table(w, p, depth, opts);
  const auto vdt = build_dual_reducing_table(w, p, depth, opts);
  return ap_characteristic_reducing(vt, vdt, p);
}

// Double-integral characteristic, Lebesgue form:
// sup_I |I|^{-1} int_I ( |I|^{-1} int_I ||W^{1/p}(x) W^{-1/p}(t)||^{p'} dt )^{p/p'} dx
inline ApCharacteristic ap_characteristic_integral(const MatrixWeight& w, double p,
                                                   int depth) {
  require(p > 1.0, "ap_characteristic_integral: p must exceed 1");
  require(depth >= 0 && depth <= w.resolution - 2,
          "ap_characteristic_integral: depth must satisfy depth <= resolution - 2");
  check_weight_admissible(w, p);
  const double pp = dual_exponent(p);
  const MatrixSymbol pf = weight_power_field(w, 1.0 / p);
  const MatrixSymbol pfinv = weight_power_field(w, -1.0 / p);
  ApCharacteristic ch;
  ch.per_depth.assign(static_cast<std::size_t>(depth) + 1, 0.0);
  double best = -1.0;
  std::mutex mu;
  for (int lvl = 0; lvl <= depth; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    const std::size_t span = std::size_t{1} << (w.resolution - lvl);
    std::vector<double> vals(lo, 0.0);
    parallel_for(lo, [&](std::size_t k) {
      const std::size_t start = k * span;
      double outer = 0.0;
      for (std::size_t x = start; x < start + span; ++x) {
        double inner = 0.0;
        for (std::size_t t = start; t < start + span; ++t)
          inner += std::pow(op_norm(pf.cells[x] * pfinv.cells[t]), pp);
        outer += std::pow(inner / static_cast<double>(span), p / pp);
      }
      vals[k] = outer / static_cast<double>(span);
    });
    double lvl_best = 0.0;
    std::size_t lvl_arg = 0;
    for (std::size_t k = 0; k < lo; ++k)
      if (vals[k] > lvl_best) { lvl_best = vals[k]; lvl_arg = k; }
    if (lvl_best > best) {
      best = lvl_best;
      ch.attaining = DyadicCube{lvl, static_cast<std::int64_t>(lvl_arg)};
    }
    const double prev = lvl > 0 ? ch.per_depth[static_cast<std::size_t>(lvl) - 1] : 0.0;
    ch.per_depth[static_cast<std::size_t>(lvl)] = std::max(prev, lvl_best);
  }
  ch.powp_max = best;
  ch.norm_max = std::pow(best, 1.0 / p);
  return ch;
}

}  // namespace dyadicw
