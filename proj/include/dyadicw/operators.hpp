#pragma once

// Dyadic operators over cell-sampled fields: the paraproduct pi_B, Haar
// multipliers T_A, the constant reducing-operator multipliers M_{W,p}, the
// embedding operator Pi_A, weighted L^p and Triebel-Lizorkin norms, and
// empirical operator-norm estimation (certified lower bounds with replayable
// witnesses).

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dyadicw/dyadic.hpp"
#include "dyadicw/linalg.hpp"
#include "dyadicw/rng.hpp"
#include "dyadicw/threading.hpp"
#include "dyadicw/weights.hpp"

namespace dyadicw {

// Finitely supported cube-indexed matrix sequence; unset cubes read as zero.
struct MatrixSequence {
  int dim = 0;
  int max_level = -1;  // deepest stored level, -1 while empty
  std::unordered_map<std::size_t, Mat> entries;  // keyed by heap index

  static MatrixSequence zero(int dim) {
    check_dim(dim, "MatrixSequence");
    MatrixSequence s;
    s.dim = dim;
    return s;
  }
  void set(const DyadicCube& c, const Mat& m) {
    validate_cube(c);
    require(m.dim() == dim, "MatrixSequence: entry dimension mismatch");
    entries[flat_index(c)] = m;
    max_level = std::max(max_level, c.level);
  }
  Mat at(const DyadicCube& c) const {
    validate_cube(c);
    const auto it = entries.find(flat_index(c));
    return it == entries.end() ? Mat(dim) : it->second;
  }
};

inline MatrixSequence sequence_from(int dim, int max_level,
                                    const std::function<Mat(const DyadicCube&)>& gen) {
  MatrixSequence s = MatrixSequence::zero(dim);
  for (int lvl = 0; lvl <= max_level; ++lvl)
    for (std::int64_t k = 0; k < (std::int64_t{1} << lvl); ++k)
      s.set({lvl, k}, gen({lvl, k}));
  return s;
}

// Haar coefficients of a matrix symbol as a sequence (B_I for levels <= max_level).
inline MatrixSequence haar_coefficient_sequence(const MatrixSymbol& b, int max_level) {
  require(max_level < b.resolution,
          "haar_coefficient_sequence: level at or below the sample resolution "
          "(insufficient-resolution error)");
  const MatSpectrum sp = analyze(b);
  MatrixSequence s = MatrixSequence::zero(b.dim);
  for (int lvl = 0; lvl <= max_level; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    for (std::size_t i = lo; i < 2 * lo; ++i)
      s.set(cube_from_flat(i), sp.coeff[i]);
  }
  return s;
}

// pi_B f = sum_I B_I (m_I f) h_I
inline VectorField paraproduct_apply(const MatrixSymbol& b, const VectorField& f) {
  require(b.dim == f.dim, "paraproduct: dimension mismatch");
  require(b.resolution == f.resolution, "paraproduct: fields must share a resolution");
  const MatSpectrum sb = analyze(b);
  const auto avg = average_table(f);
  VecSpectrum out;
  out.dim = f.dim;
  out.resolution = f.resolution;
  out.mean = Vec(f.dim);
  out.coeff.assign(sb.coeff.size(), Vec(f.dim));
  for (int lvl = 0; lvl < f.resolution; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    for (std::size_t i = lo; i < 2 * lo; ++i) out.coeff[i] = sb.coeff[i] * avg[i];
  }
  return synthesize(out);
}

// T_A f = sum_I A_I f_I h_I (diagonal in the Haar basis)
inline VectorField haar_multiplier_apply(const MatrixSequence& a, const VectorField& f) {
  require(a.dim == f.dim, "haar multiplier: dimension mismatch");
  require(a.max_level < f.resolution,
          "haar multiplier: sequence deeper than the field resolution "
          "(insufficient-resolution error)");
  const VecSpectrum sp = analyze(f);
  VecSpectrum out;
  out.dim = f.dim;
  out.resolution = f.resolution;
  out.mean = Vec(f.dim);
  out.coeff.assign(sp.coeff.size(), Vec(f.dim));
  for (const auto& [idx, m] : a.entries) out.coeff[idx] = m * sp.coeff[idx];
  return synthesize(out);
}

enum class MultiplierMode { V, V_inverse, V_dual };

// M_{W,p} f = sum_I V_I f_I h_I (and its inverse / dual variants). Reducing
// operators exist down to level resolution-2 (a cube needs at least four
// cells); the finest coefficient level passes through unchanged, so the
// V / V_inverse modes stay exact mutual inverses on mean-free fields.
inline VectorField constant_multiplier(const ReducingTable& t, const VectorField& f,
                                       MultiplierMode mode) {
  require(t.dim == f.dim, "constant multiplier: dimension mismatch");
  require(t.depth >= f.resolution - 2,
          "constant multiplier: reducing table shallower than resolution - 2 "
          "(incomplete-map error)");
  if (mode == MultiplierMode::V_dual)
    require(t.dual, "constant multiplier: V_dual mode needs the dual reducing table");
  else
    require(!t.dual, "constant multiplier: V modes need the primary reducing table");
  const VecSpectrum sp = analyze(f);
  VecSpectrum out = sp;
  out.mean = Vec(f.dim);
  for (int lvl = 0; lvl < f.resolution; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    for (std::size_t i = lo; i < 2 * lo; ++i) {
      if (lvl > t.depth) continue;  // finest level: no reducing operator
      const Mat& v = t.V[i];
      out.coeff[i] = (mode == MultiplierMode::V_inverse) ? inverse(v) * sp.coeff[i]
                                                         : v * sp.coeff[i];
    }
  }
  return synthesize(out);
}

inline VectorField constant_multiplier(const MatrixWeight& w, double p,
                                       const VectorField& f, MultiplierMode mode,
                                       const JohnTableOptions& opts = {}) {
  require(f.resolution >= 2, "constant multiplier: resolution too small");
  const int depth = f.resolution - 2;
  const ReducingTable t = (mode == MultiplierMode::V_dual)
                              ? build_dual_reducing_table(w, p, depth, opts)
                              : build_reducing_table(w, p, depth, opts);
  return constant_multiplier(t, f, mode);
}

// Pi_A f = sum_I V_I A_I m_I(W^{-1/p} f) h_I
inline VectorField embedding_operator_apply(const MatrixSequence& a,
                                            const ReducingTable& vt,
                                            const MatrixSymbol& w_inv_p,
                                            const VectorField& f) {
  require(a.dim == f.dim && vt.dim == f.dim && w_inv_p.dim == f.dim,
          "embedding operator: dimension mismatch");
  require(w_inv_p.resolution == f.resolution,
          "embedding operator: fields must share a resolution");
  require(!vt.dual, "embedding operator: needs the primary reducing table");
  require(a.max_level <= vt.depth,
          "embedding operator: sequence deeper than the reducing table "
          "(incomplete-map error)");
  VectorField g = VectorField::zero(f.dim, f.resolution);
  for (std::size_t i = 0; i < g.cells.size(); ++i)
    g.cells[i] = w_inv_p.cells[i] * f.cells[i];
  const auto avg = average_table(g);
  VecSpectrum out;
  out.dim = f.dim;
  out.resolution = f.resolution;
  out.mean = Vec(f.dim);
  out.coeff.assign(std::size_t{1} << f.resolution, Vec(f.dim));
  for (const auto& [idx, m] : a.entries)
    out.coeff[idx] = vt.V[idx] * (m * avg[idx]);
  return synthesize(out);
}

inline VectorField embedding_operator_apply(const MatrixSequence& a,
                                            const MatrixWeight& w, double p,
                                            const VectorField& f,
                                            const JohnTableOptions& opts = {}) {
  if (a.max_level < 0) return VectorField::zero(f.dim, f.resolution);
  require(a.max_level <= f.resolution - 2,
          "embedding operator: sequence deeper than resolution - 2 "
          "(incomplete-map error)");
  // the table only needs to cover the sequence support
  const ReducingTable vt = build_reducing_table(w, p, a.max_level, opts);
  return embedding_operator_apply(a, vt, weight_power_field(w, -1.0 / p), f);
}

// ||f||_{L^p(W)} = (int |W^{1/p}(x) f(x)|^p dx)^{1/p}, cellwise exact.
inline double weighted_lp_norm(const MatrixSymbol& w_pow_p, double p,
                               const VectorField& f) {
  require(p > 1.0, "weighted_lp_norm: p must exceed 1");
  require(w_pow_p.dim == f.dim, "weighted_lp_norm: dimension mismatch");
  require(w_pow_p.resolution == f.resolution,
          "weighted_lp_norm: fields must share a resolution");
  double acc = 0.0;
  for (std::size_t i = 0; i < f.cells.size(); ++i)
    acc += std::pow((w_pow_p.cells[i] * f.cells[i]).norm(), p);
  return std::pow(acc * std::ldexp(1.0, -f.resolution), 1.0 / p);
}

inline double weighted_lp_norm(const MatrixWeight& w, double p, const VectorField& f) {
  return weighted_lp_norm(weight_power_field(w, 1.0 / p), p, f);
}

// ( int ( sum_{level <= depth-1} |V_I f_I|^2 |I|^{-1} chi_I )^{p/2} )^{1/p}
// summed over the levels whose reducing operators exist (<= resolution - 2).
// The root mean carries no Haar content and is excluded; callers compare
// against mean-free fields.
inline double triebel_lizorkin_norm(const ReducingTable& vt, double p,
                                    const VectorField& f) {
  require(p > 1.0, "triebel_lizorkin_norm: p must exceed 1");
  require(!vt.dual, "triebel_lizorkin_norm: needs the primary reducing table");
  require(f.resolution >= 2, "triebel_lizorkin_norm: resolution too small");
  require(vt.depth >= f.resolution - 2,
          "triebel_lizorkin_norm: reducing table shallower than resolution - 2 "
          "(incomplete-map error)");
  const VectorField s = square_function(
      f, [&](const DyadicCube& c) { return vt.at(c); }, f.resolution - 1);
  return lp_norm(s, p);
}

inline double triebel_lizorkin_norm(const MatrixWeight& w, double p,
                                    const VectorField& f,
                                    const JohnTableOptions& opts = {}) {
  require(f.resolution >= 2, "triebel_lizorkin_norm: resolution too small");
  return triebel_lizorkin_norm(build_reducing_table(w, p, f.resolution - 2, opts), p, f);
}

// A linear map on fields plus (optionally) its adjoint for p = 2 iteration.
struct LinearOperator {
  std::function<VectorField(const VectorField&)> apply;
  std::function<VectorField(const VectorField&)> apply_adjoint;
};

enum class NormStrategy { power_iteration_p2, random_family, structured_family };

inline const char* strategy_name(NormStrategy s) {
  switch (s) {
    case NormStrategy::power_iteration_p2: return "power_iteration_p2";
    case NormStrategy::random_family: return "random_family";
    case NormStrategy::structured_family: return "structured_family";
  }
  return "?";
}

struct OperatorNormEstimate {
  double lower_bound = 0.0;
  NormStrategy strategy = NormStrategy::random_family;
  int trials = 0;
  std::string witness;           // human-readable description of the maximizer
  VectorField witness_field;     // replayable input achieving lower_bound
  std::vector<double> saturation;  // prefix max of ratios in trial order
};

struct NormEstimateOptions {
  int trials = 64;                 // random_family sample count
  std::uint64_t seed = 0x5eedULL;
  int max_power_iterations = 50000;
  double power_tol = 1e-6;         // relative Rayleigh stagnation
  int restarts = 3;                // independent power-iteration starts
  // optional x-dependent factor G for structured inputs chi_J G(x) e_i
  // (e.g. W^{-1/p'} for the weighted-indicator test family)
  const MatrixSymbol* indicator_factor = nullptr;
};

namespace detail {

inline VectorField random_unit_field(int dim, int res, Rng& rng) {
  VectorField f = VectorField::zero(dim, res);
  for (auto& c : f.cells)
    for (int i = 0; i < dim; ++i) c[i] = rng.uniform(-1.0, 1.0);
  return f;
}

inline void check_operator_linearity(const LinearOperator& op, int dim, int res,
                                     std::uint64_t seed) {
  Rng rng(seed ^ 0x11bea7ULL);
  for (int t = 0; t < 3; ++t) {
    VectorField f = random_unit_field(dim, res, rng);
    VectorField g = random_unit_field(dim, res, rng);
    const double alpha = rng.uniform(-2.0, 2.0);
    VectorField comb = VectorField::zero(dim, res);
    for (std::size_t i = 0; i < comb.cells.size(); ++i)
      comb.cells[i] = f.cells[i] * alpha + g.cells[i];
    const VectorField lhs = op.apply(comb);
    const VectorField of = op.apply(f);
    const VectorField og = op.apply(g);
    double diff = 0.0, scale = 1.0;
    for (std::size_t i = 0; i < comb.cells.size(); ++i) {
      const Vec rhs = of.cells[i] * alpha + og.cells[i];
      diff = std::max(diff, (lhs.cells[i] - rhs).norm());
      scale = std::max(scale, lhs.cells[i].norm());
    }
    require(diff <= 1e-8 * scale,
            "operator_norm_estimate: operator failed the linearity spot check "
            "(nonlinearity error)");
  }
}

}  // namespace detail

inline OperatorNormEstimate operator_norm_estimate(const LinearOperator& op, int dim,
                                                   int resolution, double p,
                                                   NormStrategy strategy,
                                                   const NormEstimateOptions& opts = {}) {
  require(static_cast<bool>(op.apply), "operator_norm_estimate: missing apply");
  require(p > 1.0, "operator_norm_estimate: p must exceed 1");
  check_dim(dim, "operator_norm_estimate");
  require(resolution >= 1 && resolution <= kMaxLevel,
          "operator_norm_estimate: resolution outside supported range");
  detail::check_operator_linearity(op, dim, resolution, opts.seed);

  OperatorNormEstimate est;
  est.strategy = strategy;

  if (strategy == NormStrategy::power_iteration_p2) {
    require(p == 2.0, "operator_norm_estimate: power_iteration_p2 requires p = 2");
    require(static_cast<bool>(op.apply_adjoint),
            "operator_norm_estimate: power_iteration_p2 needs apply_adjoint");
    double best = -1.0;
    for (int r = 0; r < std::max(1, opts.restarts); ++r) {
      Rng rng = Rng::for_trial(opts.seed, static_cast<std::uint64_t>(r));
      VectorField x = detail::random_unit_field(dim, resolution, rng);
      double nx = lp_norm(x, 2.0);
      if (nx == 0.0) continue;
      for (auto& c : x.cells) c *= 1.0 / nx;
      double rayleigh_prev = -1.0;
      int it = 0;
      for (; it < opts.max_power_iterations; ++it) {
        const VectorField y = op.apply(x);
        const double ny = lp_norm(y, 2.0);
        if (ny == 0.0) break;  // in the kernel: restart contributes 0
        const double rayleigh = ny * ny;
        VectorField z = op.apply_adjoint(y);
        const double nz = lp_norm(z, 2.0);
        if (nz == 0.0) break;
        for (auto& c : z.cells) c *= 1.0 / nz;
        x = std::move(z);
        if (rayleigh_prev >= 0.0 &&
            std::abs(rayleigh - rayleigh_prev) <= opts.power_tol * rayleigh)
          break;
        rayleigh_prev = rayleigh;
      }
      const double nxx = lp_norm(x, 2.0);
      const double ratio = nxx == 0.0 ? 0.0 : lp_norm(op.apply(x), 2.0) / nxx;
      est.trials += it + 1;
      est.saturation.push_back(std::max(ratio, est.saturation.empty()
                                                   ? 0.0
                                                   : est.saturation.back()));
      if (ratio > best) {
        best = ratio;
        est.witness_field = x;
        est.witness = "power iteration fixed point (restart " + std::to_string(r) + ")";
      }
    }
    est.lower_bound = std::max(best, 0.0);
    return est;
  }

  // trial families: generated deterministically, evaluated in parallel
  std::vector<VectorField> inputs;
  std::vector<std::string> labels;
  if (strategy == NormStrategy::random_family) {
    require(opts.trials >= 1, "operator_norm_estimate: need at least one trial");
    for (int t = 0; t < opts.trials; ++t) {
      Rng rng = Rng::for_trial(opts.seed, static_cast<std::uint64_t>(t));
      inputs.push_back(detail::random_unit_field(dim, resolution, rng));
      labels.push_back("random field, trial " + std::to_string(t));
    }
  } else {
    if (opts.indicator_factor) {
      require(opts.indicator_factor->dim == dim &&
                  opts.indicator_factor->resolution == resolution,
              "operator_norm_estimate: indicator factor shape mismatch");
    }
    for (int lvl = 0; lvl < resolution; ++lvl) {
      for (std::int64_t k = 0; k < (std::int64_t{1} << lvl); ++k) {
        const DyadicCube J{lvl, k};
        const std::size_t span = std::size_t{1} << (resolution - lvl);
        const std::size_t start = static_cast<std::size_t>(k) * span;
        const std::string tag =
            "(" + std::to_string(lvl) + "," + std::to_string(k) + ")";
        for (int i = 0; i < dim; ++i) {
          VectorField ind = VectorField::zero(dim, resolution);
          for (std::size_t c = 0; c < span; ++c) ind.cells[start + c] = Vec::unit(dim, i);
          inputs.push_back(std::move(ind));
          labels.push_back("indicator chi_" + tag + " e" + std::to_string(i));

          inputs.push_back(haar_atom(dim, resolution, J, i));
          labels.push_back("haar atom h_" + tag + " e" + std::to_string(i));

          if (opts.indicator_factor) {
            VectorField wf = VectorField::zero(dim, resolution);
            for (std::size_t c = 0; c < span; ++c)
              wf.cells[start + c] = opts.indicator_factor->cells[start + c] *
                                    Vec::unit(dim, i);
            inputs.push_back(std::move(wf));
            labels.push_back("weighted indicator chi_" + tag + " G e" +
                             std::to_string(i));
          }
        }
      }
    }
  }

  std::vector<double> ratios(inputs.size(), 0.0);
  parallel_for(inputs.size(), [&](std::size_t t) {
    const double nf = lp_norm(inputs[t], p);
    if (nf > 0.0) ratios[t] = lp_norm(op.apply(inputs[t]), p) / nf;
  });
  std::size_t arg = 0;
  double run = 0.0;
  est.saturation.reserve(ratios.size());
  for (std::size_t t = 0; t < ratios.size(); ++t) {
    if (ratios[t] > ratios[arg]) arg = t;
    run = std::max(run, ratios[t]);
    est.saturation.push_back(run);
  }
  est.trials = static_cast<int>(inputs.size());
  est.lower_bound = ratios[arg];
  est.witness = labels[arg];
  est.witness_field = inputs[arg];
  return est;
}

}  // namespace dyadicw
