#pragma once

// Weighted BMO functionals, the Carleson-embedding conditions, the
// Haar-multiplier boundedness criterion, and the BMO_{W,p,q} scale, plus the
// equivalence report tying the embedding-theorem quantities together.
//
// Conventions. MatrixSequence entries act at multiplier scale (the same
// normalization as haar_multiplier_apply), so the Carleson sums weight each
// term by |I|; the embedding operator inside equivalence_report rescales
// entries by |I|^{1/2} to measure the matching operator norm. Carleson and
// Haar-criterion terms use the operator norm; the BMO integrands use the
// Frobenius norm, which makes the Parseval-identity oracle exact.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "dyadicw/dyadic.hpp"
#include "dyadicw/linalg.hpp"
#include "dyadicw/operators.hpp"
#include "dyadicw/threading.hpp"
#include "dyadicw/weights.hpp"

namespace dyadicw {

namespace detail {

inline void check_carleson_args(const MatrixSequence& a, const ReducingTable& t,
                                int depth, const char* what) {
  require(a.dim == t.dim, std::string(what) + ": dimension mismatch");
  require(depth >= 0, std::string(what) + ": depth must be nonnegative");
  require(depth <= t.depth, std::string(what) +
                                ": reducing table shallower than requested depth "
                                "(incomplete-map error)");
}

// entries of `a` at levels <= depth, as (heap index, matrix) pairs
inline std::vector<std::pair<std::size_t, Mat>> clipped_entries(
    const MatrixSequence& a, int depth) {
  std::vector<std::pair<std::size_t, Mat>> items;
  items.reserve(a.entries.size());
  const std::size_t limit = heap_size(depth);
  for (const auto& [idx, m] : a.entries)
    if (idx < limit) items.emplace_back(idx, m);
  return items;
}

// sup over cubes J to `depth` of 2^{level(J)} * (subtree sum of per-cube terms)
inline double carleson_sup(std::vector<double>& term, int depth) {
  for (std::size_t i = (std::size_t{1} << depth) - 1; i >= 1; --i)
    term[i] += term[2 * i] + term[2 * i + 1];
  double best = 0.0;
  for (int lvl = 0; lvl <= depth; ++lvl) {
    const double scale = std::ldexp(1.0, lvl);
    const std::size_t lo = std::size_t{1} << lvl;
    for (std::size_t i = lo; i < 2 * lo; ++i) best = std::max(best, term[i] * scale);
  }
  return best;
}

}  // namespace detail

// sup_J |J|^{-1} sum_{I in D(J), level <= depth} ||V_I A_I V_I^{-1}||^2 |I|
inline double carleson_b(const MatrixSequence& a, const ReducingTable& vt, int depth) {
  require(!vt.dual, "carleson_b: needs the primary reducing table");
  detail::check_carleson_args(a, vt, depth, "carleson_b");
  const auto items = detail::clipped_entries(a, depth);
  std::vector<double> term(heap_size(depth), 0.0);
  parallel_for(items.size(), [&](std::size_t t) {
    const std::size_t idx = items[t].first;
    const DyadicCube I = cube_from_flat(idx);
    const double nrm = op_norm(vt.V[idx] * items[t].second * inverse(vt.V[idx]));
    term[idx] = nrm * nrm * std::ldexp(1.0, -I.level);
  });
  return detail::carleson_sup(term, depth);
}

inline double carleson_b(const MatrixSequence& a, const MatrixWeight& w, double p,
                         int depth, const JohnTableOptions& opts = {}) {
  return carleson_b(a, build_reducing_table(w, p, depth, opts), depth);
}

struct CarlesonBound {
  double value = 0.0;
  DyadicCube attaining = root_cube();
};

namespace detail {

// least C with |J|^{-1} sum_{I in D(J)} X_I^* X_I |I| <= C V_J^2, as the max
// generalized eigenvalue over J; X_I supplied per entry
template <class XFn>
CarlesonBound carleson_c_core(const std::vector<std::pair<std::size_t, Mat>>& items,
                              const ReducingTable& t, int depth, XFn&& xfn) {
  const std::size_t n = heap_size(depth);
  std::vector<Mat> sums(n, Mat(t.dim));
  parallel_for(items.size(), [&](std::size_t k) {
    const std::size_t idx = items[k].first;
    const Mat x = xfn(idx, items[k].second);
    sums[idx] = x.transpose() * x * std::ldexp(1.0, -cube_from_flat(idx).level);
  });
  for (std::size_t i = (std::size_t{1} << depth) - 1; i >= 1; --i)
    sums[i] += sums[2 * i] + sums[2 * i + 1];
  std::vector<double> lam(n, 0.0);
  parallel_for(n - 1, [&](std::size_t k) {
    const std::size_t i = k + 1;
    const Mat vinv = inverse(t.V[i]);
    Mat x = vinv * sums[i] * vinv;
    x *= std::ldexp(1.0, cube_from_flat(i).level);
    Mat sym = x;
    for (int r = 0; r < t.dim; ++r)
      for (int c = 0; c < t.dim; ++c) sym(r, c) = 0.5 * (x(r, c) + x(c, r));
    lam[i] = eigen_sym(sym).values[0];
  });
  CarlesonBound out;
  for (std::size_t i = 1; i < n; ++i)
    if (lam[i] > out.value) {
      out.value = lam[i];
      out.attaining = cube_from_flat(i);
    }
  return out;
}

}  // namespace detail

// branch 2 <= p: least C with |J|^{-1} sum A_I^* V_I^2 A_I |I| <= C V_J^2
inline CarlesonBound carleson_c_detail(const MatrixSequence& a, const ReducingTable& vt,
                                       int depth) {
  require(!vt.dual, "carleson_c: needs the primary reducing table");
  detail::check_carleson_args(a, vt, depth, "carleson_c");
  return detail::carleson_c_core(
      detail::clipped_entries(a, depth), vt, depth,
      [&](std::size_t idx, const Mat& m) { return vt.V[idx] * m; });
}

inline double carleson_c(const MatrixSequence& a, const ReducingTable& vt, int depth) {
  return carleson_c_detail(a, vt, depth).value;
}

// branch p <= 2: least C with |J|^{-1} sum A_I (V'_I)^2 A_I^* |I| <= C (V'_J)^2
inline CarlesonBound carleson_c_dual_detail(const MatrixSequence& a,
                                            const ReducingTable& vdt, int depth) {
  require(vdt.dual, "carleson_c_dual: needs the dual reducing table");
  detail::check_carleson_args(a, vdt, depth, "carleson_c_dual");
  return detail::carleson_c_core(
      detail::clipped_entries(a, depth), vdt, depth,
      [&](std::size_t idx, const Mat& m) { return vdt.V[idx] * m.transpose(); });
}

inline double carleson_c_dual(const MatrixSequence& a, const ReducingTable& vdt,
                              int depth) {
  return carleson_c_dual_detail(a, vdt, depth).value;
}

inline double carleson_c(const MatrixSequence& a, const MatrixWeight& w, double p,
                         int depth, const JohnTableOptions& opts = {}) {
  if (p >= 2.0) return carleson_c(a, build_reducing_table(w, p, depth, opts), depth);
  return carleson_c_dual(a, build_dual_reducing_table(w, p, depth, opts), depth);
}

namespace detail {

// sup over cubes I (level <= depth) of |I|^{-1} sum_{cells c in I} term(c, i, m_I b)
// * cell width; term sees the cube heap index and the mean of b over the cube
template <class TermFn>
double oscillation_sup(const MatrixSymbol& b, int depth, TermFn&& term) {
  const int L = b.resolution;
  const auto sums = cell_sum_heap(b.cells, L, Mat(b.dim));
  double best = 0.0;
  for (int lvl = 0; lvl <= depth; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    const std::size_t span = std::size_t{1} << (L - lvl);
    std::vector<double> vals(lo, 0.0);
    parallel_for(lo, [&](std::size_t t) {
      const std::size_t i = lo + t;
      const Mat m = sums[i] * std::ldexp(1.0, lvl - L);
      double acc = 0.0;
      for (std::size_t c = t * span; c < (t + 1) * span; ++c) acc += term(c, i, m);
      vals[t] = acc * std::ldexp(1.0, lvl - L);
    });
    for (double v : vals) best = std::max(best, v);
  }
  return best;
}

inline std::vector<Mat> inverse_heap(const ReducingTable& t, int depth) {
  std::vector<Mat> inv(heap_size(depth), Mat(t.dim));
  parallel_for(inv.size() - 1, [&](std::size_t k) { inv[k + 1] = inverse(t.V[k + 1]); });
  return inv;
}

}  // namespace detail

// one branch of the weighted BMO functional, given the matching power field
// and reducing table:
//   primary: sup_I |I|^{-1} int_I ||W^{1/p}(x)(B(x) - m_I B) V_I^{-1}||^p dx
//   dual:    sup_I |I|^{-1} int_I ||W^{-1/p}(x)(B(x) - m_I B)^* (V'_I)^{-1}||^{p'} dx
inline double bmo_w_branch(const MatrixSymbol& b, const MatrixSymbol& w_pow,
                           const ReducingTable& t, double p, int depth) {
  require(p > 1.0, "bmo norm: p must exceed 1");
  require(b.dim == t.dim && w_pow.dim == b.dim, "bmo norm: dimension mismatch");
  require(w_pow.resolution == b.resolution, "bmo norm: fields must share a resolution");
  require(depth >= 0 && depth <= t.depth,
          "bmo norm: reducing table shallower than requested depth "
          "(incomplete-map error)");
  require(depth <= b.resolution - 2, "bmo norm: depth beyond resolution - 2");
  const double e = t.dual ? dual_exponent(p) : p;
  const auto vinv = detail::inverse_heap(t, depth);
  return detail::oscillation_sup(
      b, depth, [&](std::size_t c, std::size_t i, const Mat& m) {
        const Mat d = b.cells[c] - m;
        const Mat x = t.dual ? w_pow.cells[c] * d.transpose() * vinv[i]
                             : w_pow.cells[c] * d * vinv[i];
        return std::pow(x.frobenius(), e);
      });
}

// branch picked by p; at p = 2 both branches are computed and the larger one
// is returned (the two characterizations coincide up to A_2 constants there)
inline double bmo_w_norm(const MatrixSymbol& b, const MatrixWeight& w, double p,
                         int depth, const JohnTableOptions& opts = {}) {
  require(b.resolution == w.resolution, "bmo norm: fields must share a resolution");
  double best = 0.0;
  if (p >= 2.0)
    best = std::max(best, bmo_w_branch(b, weight_power_field(w, 1.0 / p),
                                       build_reducing_table(w, p, depth, opts), p,
                                       depth));
  if (p <= 2.0)
    best = std::max(best, bmo_w_branch(b, weight_power_field(w, -1.0 / p),
                                       build_dual_reducing_table(w, p, depth, opts), p,
                                       depth));
  return best;
}

// sup_{I, level <= depth} ||V_I A_I V_I^{-1}|| (boundedness criterion for T_A)
inline double haar_criterion(const MatrixSequence& a, const ReducingTable& vt,
                             int depth) {
  require(!vt.dual, "haar_criterion: needs the primary reducing table");
  detail::check_carleson_args(a, vt, depth, "haar_criterion");
  const auto items = detail::clipped_entries(a, depth);
  std::vector<double> vals(items.size(), 0.0);
  parallel_for(items.size(), [&](std::size_t t) {
    const std::size_t idx = items[t].first;
    vals[t] = op_norm(vt.V[idx] * items[t].second * inverse(vt.V[idx]));
  });
  double best = 0.0;
  for (double v : vals) best = std::max(best, v);
  return best;
}

inline double haar_criterion(const MatrixSequence& a, const MatrixWeight& w, double p,
                             int depth, const JohnTableOptions& opts = {}) {
  return haar_criterion(a, build_reducing_table(w, p, depth, opts), depth);
}

// the bilinear quantity sup ||V_I A_I V'_I|| from the criterion's proof
inline double haar_criterion_bilinear(const MatrixSequence& a, const ReducingTable& vt,
                                      const ReducingTable& vdt, int depth) {
  require(!vt.dual && vdt.dual,
          "haar_criterion_bilinear: needs the primary and the dual reducing table");
  detail::check_carleson_args(a, vt, depth, "haar_criterion_bilinear");
  detail::check_carleson_args(a, vdt, depth, "haar_criterion_bilinear");
  const auto items = detail::clipped_entries(a, depth);
  std::vector<double> vals(items.size(), 0.0);
  parallel_for(items.size(), [&](std::size_t t) {
    const std::size_t idx = items[t].first;
    vals[t] = op_norm(vt.V[idx] * items[t].second * vdt.V[idx]);
  });
  double best = 0.0;
  for (double v : vals) best = std::max(best, v);
  return best;
}

// sup_I |I|^{-1} int_I ||V_I (B(x) - m_I B) V_I^{-1}||^q dx, the q-scale of
// weighted BMO; branchless in p (p enters through the table)
inline double bmo_wpq_norm(const MatrixSymbol& b, const ReducingTable& vt, double q,
                           int depth) {
  require(q > 1.0, "bmo_wpq_norm: q must exceed 1");
  require(!vt.dual, "bmo_wpq_norm: needs the primary reducing table");
  require(b.dim == vt.dim, "bmo_wpq_norm: dimension mismatch");
  require(depth >= 0 && depth <= vt.depth,
          "bmo_wpq_norm: reducing table shallower than requested depth "
          "(incomplete-map error)");
  require(depth <= b.resolution - 2, "bmo_wpq_norm: depth beyond resolution - 2");
  const auto vinv = detail::inverse_heap(vt, depth);
  return detail::oscillation_sup(
      b, depth, [&](std::size_t c, std::size_t i, const Mat& m) {
        return std::pow((vt.V[i] * (b.cells[c] - m) * vinv[i]).frobenius(), q);
      });
}

inline double bmo_wpq_norm(const MatrixSymbol& b, const MatrixWeight& w, double p,
                           double q, int depth, const JohnTableOptions& opts = {}) {
  require(b.resolution == w.resolution, "bmo_wpq_norm: fields must share a resolution");
  return bmo_wpq_norm(b, build_reducing_table(w, p, depth, opts), q, depth);
}

enum class CarlesonBranch { p_ge_2, p_le_2 };

inline const char* branch_name(CarlesonBranch b) {
  return b == CarlesonBranch::p_ge_2 ? "p_ge_2" : "p_le_2";
}

struct CarlesonReport {
  double p = 0.0;
  int depth = 0;
  double cond_b = 0.0;
  double cond_c = 0.0;        // branch picked by p
  double cond_c_other = 0.0;  // the other branch, computed only at p = 2
  OperatorNormEstimate op_norm_a;
  // quotients at norm scale (cond_b and cond_c scale as squares)
  double ratio_b_c = 0.0;
  double ratio_a_b = 0.0;
  double ratio_a_c = 0.0;
  CarlesonBranch branch = CarlesonBranch::p_ge_2;
};

inline CarlesonReport equivalence_report(const MatrixSequence& a, const MatrixWeight& w,
                                         double p, int depth, int trials,
                                         const JohnTableOptions& opts = {}) {
  require(trials >= 1, "equivalence_report: need at least one trial");
  const ReducingTable vt = build_reducing_table(w, p, depth, opts);
  CarlesonReport r;
  r.p = p;
  r.depth = depth;
  r.branch = p >= 2.0 ? CarlesonBranch::p_ge_2 : CarlesonBranch::p_le_2;
  r.cond_b = carleson_b(a, vt, depth);
  if (p >= 2.0) {
    r.cond_c = carleson_c(a, vt, depth);
    if (p == 2.0)
      r.cond_c_other =
          carleson_c_dual(a, build_dual_reducing_table(w, p, depth, opts), depth);
  } else {
    r.cond_c = carleson_c_dual(a, build_dual_reducing_table(w, p, depth, opts), depth);
  }

  // embedding operator on the same scale: entries carry an |I|^{1/2} factor
  MatrixSequence scaled = MatrixSequence::zero(a.dim);
  const std::size_t limit = heap_size(depth);
  for (const auto& [idx, m] : a.entries)
    if (idx < limit) {
      const DyadicCube c = cube_from_flat(idx);
      scaled.set(c, m * std::exp2(-0.5 * c.level));
    }
  const MatrixSymbol winv = weight_power_field(w, -1.0 / p);
  LinearOperator pia;
  pia.apply = [&](const VectorField& f) {
    return embedding_operator_apply(scaled, vt, winv, f);
  };
  NormEstimateOptions nopts;
  nopts.trials = trials;
  const OperatorNormEstimate rnd = operator_norm_estimate(
      pia, w.dim, w.resolution, p, NormStrategy::random_family, nopts);
  const MatrixSymbol wdual = weight_power_field(w, -1.0 / dual_exponent(p));
  nopts.indicator_factor = &wdual;
  const OperatorNormEstimate structured = operator_norm_estimate(
      pia, w.dim, w.resolution, p, NormStrategy::structured_family, nopts);
  r.op_norm_a = structured.lower_bound >= rnd.lower_bound ? structured : rnd;

  const auto quot = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  const double sb = std::sqrt(r.cond_b), sc = std::sqrt(r.cond_c);
  r.ratio_b_c = quot(sb, sc);
  r.ratio_a_b = quot(r.op_norm_a.lower_bound, sb);
  r.ratio_a_c = quot(r.op_norm_a.lower_bound, sc);
  return r;
}

}  // namespace dyadicw
