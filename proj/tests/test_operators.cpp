#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "dyadicw/operators.hpp"
#include "helpers.hpp"

using namespace dyadicw;
using testutil::max_diff;

namespace {

VectorField random_field(int dim, int res, std::uint64_t seed) {
  Rng rng(seed);
  VectorField f = VectorField::zero(dim, res);
  for (auto& c : f.cells)
    for (int i = 0; i < dim; ++i) c[i] = rng.uniform(-1.0, 1.0);
  return f;
}

// random field whose finest-level Haar coefficients vanish (cells equal in pairs)
VectorField random_coarse_field(int dim, int res, std::uint64_t seed) {
  const VectorField half = random_field(dim, res - 1, seed);
  VectorField f = VectorField::zero(dim, res);
  for (std::size_t c = 0; c < half.cells.size(); ++c) {
    f.cells[2 * c] = half.cells[c];
    f.cells[2 * c + 1] = half.cells[c];
  }
  return f;
}

VectorField subtract_mean(const VectorField& f) {
  Vec m(f.dim);
  for (const auto& c : f.cells) m += c;
  m *= std::ldexp(1.0, -f.resolution);
  VectorField g = f;
  for (auto& c : g.cells) c -= m;
  return g;
}

MatrixSymbol random_symbol(int dim, int res, std::uint64_t seed) {
  Rng rng(seed);
  MatrixSymbol b = MatrixSymbol::zero(dim, res);
  for (auto& m : b.cells)
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
  return b;
}

Mat cube_average_of(const std::vector<Mat>& cells, int res, const DyadicCube& I) {
  const std::size_t span = std::size_t{1} << (res - I.level);
  const std::size_t start = static_cast<std::size_t>(I.index) * span;
  Mat s(cells[0].dim());
  for (std::size_t c = 0; c < span; ++c) s += cells[start + c];
  return s * (1.0 / static_cast<double>(span));
}

double field_ratio(const VectorField& num, const VectorField& den, double p) {
  return lp_norm(num, p) / lp_norm(den, p);
}

}  // namespace

TEST_CASE("paraproduct acts on averages and kills its own mean") {
  const int L = 6;
  const MatrixSymbol b = random_symbol(2, L, 11);
  const VectorField f = random_field(2, L, 12);

  // zero symbol annihilates everything
  const VectorField z = paraproduct_apply(MatrixSymbol::zero(2, L), f);
  for (const auto& c : z.cells) CHECK(c.norm() == 0.0);

  // constant input c: output is (B(x) - mean B) c
  Vec cvec(2);
  cvec[0] = 0.7;
  cvec[1] = -1.3;
  const VectorField out = paraproduct_apply(b, VectorField::constant(cvec, L));
  Mat meanb(2);
  for (const auto& m : b.cells) meanb += m;
  meanb *= std::ldexp(1.0, -L);
  double worst = 0.0;
  for (std::size_t i = 0; i < out.cells.size(); ++i)
    worst = std::max(worst, (out.cells[i] - (b.cells[i] - meanb) * cvec).norm());
  CHECK(worst <= 1e-12);

  // scalar symbol times identity acts componentwise as the scalar paraproduct
  const MatrixSymbol s1 = random_symbol(1, L, 13);
  MatrixSymbol sid = MatrixSymbol::zero(2, L);
  for (std::size_t i = 0; i < sid.cells.size(); ++i)
    sid.cells[i] = Mat::identity(2) * s1.cells[i](0, 0);
  const VectorField big = paraproduct_apply(sid, f);
  for (int j = 0; j < 2; ++j) {
    VectorField comp = VectorField::zero(1, L);
    for (std::size_t i = 0; i < comp.cells.size(); ++i) comp.cells[i][0] = f.cells[i][j];
    const VectorField small = paraproduct_apply(s1, comp);
    double diff = 0.0;
    for (std::size_t i = 0; i < comp.cells.size(); ++i)
      diff = std::max(diff, std::abs(big.cells[i][j] - small.cells[i][0]));
    CHECK(diff <= 1e-12);
  }

  // linearity in the field argument
  const VectorField g = random_field(2, L, 14);
  VectorField comb = VectorField::zero(2, L);
  for (std::size_t i = 0; i < comb.cells.size(); ++i)
    comb.cells[i] = f.cells[i] * 2.5 + g.cells[i];
  const VectorField lhs = paraproduct_apply(b, comb);
  const VectorField pf = paraproduct_apply(b, f);
  const VectorField pg = paraproduct_apply(b, g);
  for (std::size_t i = 0; i < comb.cells.size(); ++i)
    CHECK((lhs.cells[i] - (pf.cells[i] * 2.5 + pg.cells[i])).norm() <= 1e-12);

  CHECK_THROWS_WITH_AS(paraproduct_apply(b, random_field(1, L, 9)),
                       doctest::Contains("dimension mismatch"), Error);
  CHECK_THROWS_WITH_AS(paraproduct_apply(b, random_field(2, L - 1, 9)),
                       doctest::Contains("share a resolution"), Error);
}

TEST_CASE("haar multipliers are diagonal in the haar basis and compose cubewise") {
  const int L = 6;
  const VectorField f = random_field(2, L, 21);

  // identity on every cube reproduces the mean-free part
  const MatrixSequence id =
      sequence_from(2, L - 1, [](const DyadicCube&) { return Mat::identity(2); });
  const VectorField mf = haar_multiplier_apply(id, f);
  const VectorField expect = subtract_mean(f);
  CHECK(max_diff(mf.cells, expect.cells) <= 1e-12);

  // empty sequence gives zero
  const VectorField z = haar_multiplier_apply(MatrixSequence::zero(2), f);
  for (const auto& c : z.cells) CHECK(c.norm() == 0.0);

  // single-cube multiplier reproduces M f_I h_I built by hand
  const DyadicCube I{3, 5};
  Mat m(2);
  m(0, 0) = 0.3;
  m(0, 1) = -1.1;
  m(1, 0) = 0.9;
  m(1, 1) = 0.2;
  MatrixSequence single = MatrixSequence::zero(2);
  single.set(I, m);
  const VectorField one = haar_multiplier_apply(single, f);
  const Vec gi = m * haar_coefficient(f, I);
  const double amp = std::sqrt(std::ldexp(1.0, I.level));
  const std::size_t span = std::size_t{1} << (L - I.level);
  const std::size_t start = static_cast<std::size_t>(I.index) * span;
  for (std::size_t c = 0; c < one.cells.size(); ++c) {
    Vec want(2);
    if (c >= start && c < start + span / 2) want = gi * amp;
    if (c >= start + span / 2 && c < start + span) want = gi * (-amp);
    CHECK((one.cells[c] - want).norm() <= 1e-12);
  }

  // composition multiplies the symbols cube by cube
  Rng rng(22);
  auto rnd = [&rng](const DyadicCube&) {
    Mat a(2);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) a(r, c) = rng.uniform(-1.0, 1.0);
    return a;
  };
  const MatrixSequence a = sequence_from(2, L - 2, rnd);
  const MatrixSequence b = sequence_from(2, L - 2, rnd);
  MatrixSequence ab = MatrixSequence::zero(2);
  for (int lvl = 0; lvl <= L - 2; ++lvl)
    for (std::int64_t k = 0; k < (std::int64_t{1} << lvl); ++k) {
      const DyadicCube c{lvl, k};
      ab.set(c, a.at(c) * b.at(c));
    }
  const VectorField chained = haar_multiplier_apply(a, haar_multiplier_apply(b, f));
  const VectorField direct = haar_multiplier_apply(ab, f);
  CHECK(max_diff(chained.cells, direct.cells) <= 1e-10);

  MatrixSequence deep = MatrixSequence::zero(2);
  deep.set({L, 0}, Mat::identity(2));
  CHECK_THROWS_WITH_AS(haar_multiplier_apply(deep, f),
                       doctest::Contains("insufficient-resolution"), Error);
}

TEST_CASE("constant reducing multipliers invert each other on mean-free fields") {
  const int L = 8;
  const VectorField f = random_field(2, L, 31);

  // identity weight: V_I = Id, so both modes reproduce the mean-free part
  const MatrixWeight idw = make_identity_weight(2, L);
  const VectorField expect = subtract_mean(f);
  CHECK(max_diff(constant_multiplier(idw, 2.0, f, MultiplierMode::V).cells,
                 expect.cells) <= 1e-12);
  CHECK(max_diff(constant_multiplier(idw, 2.0, f, MultiplierMode::V_inverse).cells,
                 expect.cells) <= 1e-12);

  // genuine weight: V then V^{-1} is the identity on mean-free fields
  const MatrixWeight w = make_power_weight(0.45, -0.3, 2.0, L);
  const ReducingTable vt = build_reducing_table(w, 2.0, L - 2);
  const VectorField round =
      constant_multiplier(vt, constant_multiplier(vt, f, MultiplierMode::V),
                          MultiplierMode::V_inverse);
  CHECK(max_diff(round.cells, expect.cells) <= 1e-9);

  // p = 2 coefficients: V_I = (m_I W)^{1/2} applied to f_I
  const VecSpectrum sf = analyze(f);
  const VecSpectrum sv = analyze(constant_multiplier(vt, f, MultiplierMode::V));
  for (const DyadicCube I : {DyadicCube{0, 0}, DyadicCube{2, 3}, DyadicCube{5, 17},
                             DyadicCube{6, 40}}) {
    const Mat v = spd_power(cube_average_of(w.cells, L, I), 0.5);
    const std::size_t i = flat_index(I);
    CHECK((sv.coeff[i] - v * sf.coeff[i]).norm() <= 1e-10);
  }
  // finest level has no reducing operator and passes through unchanged
  // (up to the synthesize/analyze round trip)
  for (std::size_t i = std::size_t{1} << (L - 1); i < (std::size_t{1} << L); ++i)
    CHECK((sv.coeff[i] - sf.coeff[i]).norm() <= 1e-12);

  // dual mode wants the dual table, primary modes want the primary one
  const ReducingTable vdt = build_dual_reducing_table(w, 2.0, L - 2);
  CHECK_NOTHROW(constant_multiplier(vdt, f, MultiplierMode::V_dual));
  CHECK_THROWS_WITH_AS(constant_multiplier(vt, f, MultiplierMode::V_dual),
                       doctest::Contains("dual reducing table"), Error);
  CHECK_THROWS_WITH_AS(constant_multiplier(vdt, f, MultiplierMode::V),
                       doctest::Contains("primary reducing table"), Error);
  const ReducingTable shallow = build_reducing_table(w, 2.0, L - 3);
  CHECK_THROWS_WITH_AS(constant_multiplier(shallow, f, MultiplierMode::V),
                       doctest::Contains("incomplete-map"), Error);
}

TEST_CASE("embedding operator reduces to the paraproduct for the identity weight") {
  const int L = 7;
  const MatrixWeight idw = make_identity_weight(2, L);

  // empty sequence: zero operator
  const VectorField f = random_field(2, L, 41);
  const VectorField z =
      embedding_operator_apply(MatrixSequence::zero(2), idw, 2.0, f);
  for (const auto& c : z.cells) CHECK(c.norm() == 0.0);

  // symbol with no content beyond level L-2: Pi_{B_I} = pi_B when W = Id
  MatrixSymbol b = MatrixSymbol::zero(2, L);
  {
    const MatrixSymbol half = random_symbol(2, L - 1, 42);
    for (std::size_t c = 0; c < half.cells.size(); ++c) {
      b.cells[2 * c] = half.cells[c];
      b.cells[2 * c + 1] = half.cells[c];
    }
  }
  const MatrixSequence a = haar_coefficient_sequence(b, L - 2);
  for (const VectorField& probe :
       {random_field(2, L, 43), subtract_mean(random_field(2, L, 44))}) {
    const VectorField lhs = embedding_operator_apply(a, idw, 2.0, probe);
    const VectorField rhs = paraproduct_apply(b, probe);
    CHECK(max_diff(lhs.cells, rhs.cells) <= 1e-10);
  }

  // single-cube action, checked against a fully hand-built V_I A m_I(W^{-1/2}f) h_I
  const int M = 8;
  const MatrixWeight w = make_power_weight(0.45, 0.3, 2.0, M);
  const DyadicCube I{3, 5};
  Mat flip(2);
  flip(0, 1) = 1.0;
  flip(1, 0) = 1.0;
  MatrixSequence one = MatrixSequence::zero(2);
  one.set(I, flip);
  const VectorField g = random_field(2, M, 45);
  const VectorField got = embedding_operator_apply(one, w, 2.0, g);

  const Mat v = spd_power(cube_average_of(w.cells, M, I), 0.5);
  const std::size_t span = std::size_t{1} << (M - I.level);
  const std::size_t start = static_cast<std::size_t>(I.index) * span;
  Vec avg(2);
  for (std::size_t c = start; c < start + span; ++c)
    avg += spd_power(w.cells[c], -0.5) * g.cells[c];
  avg *= 1.0 / static_cast<double>(span);
  const Vec coeff = v * (flip * avg);
  const double amp = std::sqrt(std::ldexp(1.0, I.level));
  for (std::size_t c = 0; c < got.cells.size(); ++c) {
    Vec want(2);
    if (c >= start && c < start + span / 2) want = coeff * amp;
    if (c >= start + span / 2 && c < start + span) want = coeff * (-amp);
    CHECK((got.cells[c] - want).norm() <= 1e-10);
  }

  MatrixSequence deep = MatrixSequence::zero(2);
  deep.set({M - 1, 0}, flip);
  CHECK_THROWS_WITH_AS(embedding_operator_apply(deep, w, 2.0, g),
                       doctest::Contains("incomplete-map"), Error);
}

TEST_CASE("weighted lp norms collapse to closed forms") {
  const int L = 8;
  const VectorField f = random_field(2, L, 51);

  // identity weight: plain lp norm
  const MatrixWeight idw = make_identity_weight(2, L);
  for (double p : {1.5, 2.0, 3.0})
    CHECK(std::abs(weighted_lp_norm(idw, p, f) - lp_norm(f, p)) <= 1e-12);

  // scalar weight: direct cell sum
  const MatrixWeight sw = make_scalar_weight(0.3, 2.0, L);
  VectorField h = VectorField::zero(1, L);
  {
    Rng rng(52);
    for (auto& c : h.cells) c[0] = rng.uniform(-1.0, 1.0);
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < h.cells.size(); ++c)
    acc += sw.cells[c](0, 0) * h.cells[c][0] * h.cells[c][0];
  CHECK(std::abs(weighted_lp_norm(sw, 2.0, h) -
                 std::sqrt(acc * std::ldexp(1.0, -L))) <= 1e-12);

  // constant unit field against diag(x^a, x^b) at p = 2: exact integral of x^a
  const double alpha = 0.45;
  const MatrixWeight w = make_power_weight(alpha, -0.3, 2.0, L);
  const VectorField e1 = VectorField::constant(Vec::unit(2, 0), L);
  CHECK(std::abs(weighted_lp_norm(w, 2.0, e1) - std::sqrt(1.0 / (alpha + 1.0))) <=
        1e-12);

  // positive homogeneity
  VectorField f2 = f;
  for (auto& c : f2.cells) c *= 2.0;
  CHECK(std::abs(weighted_lp_norm(w, 3.0, f2) - 2.0 * weighted_lp_norm(w, 3.0, f)) <=
        1e-12);

  CHECK_THROWS_WITH_AS(weighted_lp_norm(w, 1.0, f),
                       doctest::Contains("must exceed 1"), Error);
}

TEST_CASE("triebel-lizorkin norm is a weighted parseval sum over table levels") {
  const int L = 8;
  const MatrixWeight idw = make_identity_weight(2, L);

  // constants carry no haar content
  CHECK(triebel_lizorkin_norm(idw, 2.0, VectorField::constant(Vec::unit(2, 1), L)) ==
        0.0);

  // identity weight, p = 2: parseval over the levels the table covers
  const VectorField f = random_field(2, L, 61);
  const VecSpectrum sp = analyze(f);
  double sum = 0.0;
  for (int lvl = 0; lvl <= L - 2; ++lvl) {
    const std::size_t lo = std::size_t{1} << lvl;
    for (std::size_t i = lo; i < 2 * lo; ++i)
      sum += sp.coeff[i].dot(sp.coeff[i]);
  }
  CHECK(std::abs(triebel_lizorkin_norm(idw, 2.0, f) - std::sqrt(sum)) <= 1e-10);

  // fields with no finest-level content: equals the full mean-free L2 norm
  const VectorField coarse = random_coarse_field(2, L, 62);
  CHECK(std::abs(triebel_lizorkin_norm(idw, 2.0, coarse) -
                 lp_norm(subtract_mean(coarse), 2.0)) <= 1e-10);

  // table overload agrees with the weight overload
  const MatrixWeight w = make_power_weight(0.45, -0.3, 2.0, L);
  const ReducingTable vt = build_reducing_table(w, 2.0, L - 2);
  CHECK(triebel_lizorkin_norm(vt, 2.0, f) == triebel_lizorkin_norm(w, 2.0, f));

  const ReducingTable vdt = build_dual_reducing_table(w, 2.0, L - 2);
  CHECK_THROWS_WITH_AS(triebel_lizorkin_norm(vdt, 2.0, f),
                       doctest::Contains("primary reducing table"), Error);
  const ReducingTable shallow = build_reducing_table(w, 2.0, L - 3);
  CHECK_THROWS_WITH_AS(triebel_lizorkin_norm(shallow, 2.0, f),
                       doctest::Contains("incomplete-map"), Error);
  CHECK_THROWS_WITH_AS(triebel_lizorkin_norm(w, 2.0, random_field(2, 1, 9)),
                       doctest::Contains("resolution too small"), Error);
}

TEST_CASE("square-function and weighted norms stay equivalent across resolutions") {
  // the weighted norm and the square-function norm are equivalent with
  // constants depending only on the weight, so the measured ratio band
  // [c, C] must not widen as the resolution grows
  const int trials = 200;
  for (double p : {1.5, 2.0, 3.0}) {
    for (double alpha : {0.3, 0.45 * (p - 1.0)}) {
      double width6 = 0.0, width10 = 0.0;
      for (int L : {6, 10}) {
        const MatrixWeight w = make_power_weight(alpha, -alpha, p, L);
        const ReducingTable vt = build_reducing_table(w, p, L - 2);
        const MatrixSymbol wp = weight_power_field(w, 1.0 / p);
        double c = 1e300, big = 0.0;
        for (int t = 0; t < trials; ++t) {
          const VectorField f = subtract_mean(
              random_field(2, L, 7000 + static_cast<std::uint64_t>(t)));
          const double tl = triebel_lizorkin_norm(vt, p, f);
          REQUIRE(tl > 0.0);
          const double r = weighted_lp_norm(wp, p, f) / tl;
          c = std::min(c, r);
          big = std::max(big, r);
        }
        CAPTURE(p);
        CAPTURE(alpha);
        CAPTURE(L);
        CAPTURE(c);
        CAPTURE(big);
        CHECK(c > 0.0);
        CHECK(big / c <= 16.0);  // a genuine two-sided equivalence band
        (L == 6 ? width6 : width10) = big / c;
      }
      CHECK(width10 <= 1.10 * width6);
    }
  }
}

TEST_CASE("dual reducing operators dominate inverse-weight averages") {
  // |m_I(W^{-1/p}) e| <= |V'_I e| for every direction: jensen plus the lower
  // sandwich make this rigorous, so the slack is pure floating point
  const int L = 10, depth = 8;
  for (double p : {2.0, 3.0}) {
    const MatrixWeight w = make_power_weight(0.45, -0.3, p, L);
    const ReducingTable vdt = build_dual_reducing_table(w, p, depth);
    const MatrixSymbol winv = weight_power_field(w, -1.0 / p);
    for (int lvl = 0; lvl <= depth; ++lvl) {
      for (std::int64_t k = 0; k < (std::int64_t{1} << lvl); ++k) {
        const DyadicCube I{lvl, k};
        const Mat m = average(winv, I);
        const Mat& v = vdt.at(I);
        for (int d = 0; d < 64; ++d) {
          const double th = 3.14159265358979323846 * d / 64.0;
          Vec e(2);
          e[0] = std::cos(th);
          e[1] = std::sin(th);
          CHECK((m * e).norm() <= (v * e).norm() * (1.0 + 1e-8));
        }
      }
    }
  }
}

TEST_CASE("operator norm estimates are certified lower bounds with replayable witnesses") {
  const int L = 6, dim = 2;

  // zero operator: every strategy reports zero
  LinearOperator zero_op;
  zero_op.apply = [&](const VectorField& f) {
    return VectorField::zero(f.dim, f.resolution);
  };
  zero_op.apply_adjoint = zero_op.apply;
  for (NormStrategy s : {NormStrategy::power_iteration_p2, NormStrategy::random_family,
                         NormStrategy::structured_family}) {
    const OperatorNormEstimate est = operator_norm_estimate(zero_op, dim, L, 2.0, s);
    CHECK(est.lower_bound == 0.0);
    CHECK(est.trials > 0);
  }

  // mean-free projector: norm exactly 1, attained by any haar atom
  LinearOperator proj;
  proj.apply = [](const VectorField& f) {
    Vec m(f.dim);
    for (const auto& c : f.cells) m += c;
    m *= std::ldexp(1.0, -f.resolution);
    VectorField g = f;
    for (auto& c : g.cells) c -= m;
    return g;
  };
  proj.apply_adjoint = proj.apply;
  {
    const OperatorNormEstimate pow2 = operator_norm_estimate(
        proj, dim, L, 2.0, NormStrategy::power_iteration_p2);
    CHECK(pow2.lower_bound == doctest::Approx(1.0).epsilon(1e-6));
    const OperatorNormEstimate structured = operator_norm_estimate(
        proj, dim, L, 2.0, NormStrategy::structured_family);
    CHECK(structured.lower_bound == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(structured.witness.find("haar atom") != std::string::npos);
    const OperatorNormEstimate rnd = operator_norm_estimate(
        proj, dim, L, 2.0, NormStrategy::random_family);
    CHECK(rnd.lower_bound <= 1.0 + 1e-12);
    CHECK(rnd.lower_bound >= 0.5);
  }

  // haar multiplier: exact operator norm is the largest per-cube matrix norm
  Rng rng(71);
  MatrixSequence a = MatrixSequence::zero(dim);
  double sigma = 0.0;
  for (int lvl = 0; lvl <= L - 2; ++lvl)
    for (std::int64_t k = 0; k < (std::int64_t{1} << lvl); ++k) {
      Mat m(dim);
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
      if (lvl == 1 && k == 0) m *= 2.0;  // enforce a spectral gap
      a.set({lvl, k}, m);
      sigma = std::max(sigma, op_norm(m));
    }
  MatrixSequence at = MatrixSequence::zero(dim);
  for (const auto& [idx, m] : a.entries) at.set(cube_from_flat(idx), m.transpose());
  LinearOperator ta;
  ta.apply = [&a](const VectorField& f) { return haar_multiplier_apply(a, f); };
  ta.apply_adjoint = [&at](const VectorField& f) { return haar_multiplier_apply(at, f); };
  NormEstimateOptions popts;
  popts.power_tol = 1e-10;
  const OperatorNormEstimate pe = operator_norm_estimate(
      ta, dim, L, 2.0, NormStrategy::power_iteration_p2, popts);
  CHECK(std::abs(pe.lower_bound - sigma) <= 1e-6 * sigma);
  CHECK(pe.lower_bound <= sigma * (1.0 + 1e-10));

  // witness replay: the recorded field reproduces the bound on its own
  for (NormStrategy s : {NormStrategy::power_iteration_p2, NormStrategy::random_family,
                         NormStrategy::structured_family}) {
    const OperatorNormEstimate est = operator_norm_estimate(ta, dim, L, 2.0, s, popts);
    const double replay = field_ratio(ta.apply(est.witness_field), est.witness_field, 2.0);
    CHECK(std::abs(replay - est.lower_bound) <= 1e-8 * std::max(1.0, est.lower_bound));
    CHECK(est.lower_bound <= sigma * (1.0 + 1e-10));
    REQUIRE(!est.saturation.empty());
    for (std::size_t i = 1; i < est.saturation.size(); ++i)
      CHECK(est.saturation[i] >= est.saturation[i - 1]);
    if (s != NormStrategy::power_iteration_p2)
      CHECK(est.saturation.back() == est.lower_bound);
  }

  // determinism under a fixed seed
  NormEstimateOptions seeded;
  seeded.seed = 99;
  const OperatorNormEstimate r1 = operator_norm_estimate(
      ta, dim, L, 3.0, NormStrategy::random_family, seeded);
  const OperatorNormEstimate r2 = operator_norm_estimate(
      ta, dim, L, 3.0, NormStrategy::random_family, seeded);
  CHECK(r1.lower_bound == r2.lower_bound);
  CHECK(r1.witness == r2.witness);

  // structured family size: indicators and atoms per cube and component,
  // plus weighted indicators when a factor field is supplied
  const OperatorNormEstimate bare = operator_norm_estimate(
      ta, dim, L, 2.0, NormStrategy::structured_family);
  const int cubes = (1 << L) - 1;
  CHECK(bare.trials == 2 * dim * cubes);
  const MatrixWeight w = make_power_weight(0.45, -0.3, 2.0, L);
  const MatrixSymbol winvdual = weight_power_field(w, -0.5);
  NormEstimateOptions wopts;
  wopts.indicator_factor = &winvdual;
  const OperatorNormEstimate withw = operator_norm_estimate(
      ta, dim, L, 2.0, NormStrategy::structured_family, wopts);
  CHECK(withw.trials == 3 * dim * cubes);
  CHECK(withw.lower_bound >= bare.lower_bound - 1e-12);

  // guard rails
  LinearOperator affine;
  affine.apply = [](const VectorField& f) {
    VectorField g = f;
    for (auto& c : g.cells) c[0] += 1.0;
    return g;
  };
  CHECK_THROWS_WITH_AS(
      operator_norm_estimate(affine, dim, L, 2.0, NormStrategy::random_family),
      doctest::Contains("linearity"), Error);
  CHECK_THROWS_WITH_AS(
      operator_norm_estimate(ta, dim, L, 3.0, NormStrategy::power_iteration_p2),
      doctest::Contains("requires p = 2"), Error);
  LinearOperator no_adj;
  no_adj.apply = ta.apply;
  CHECK_THROWS_WITH_AS(
      operator_norm_estimate(no_adj, dim, L, 2.0, NormStrategy::power_iteration_p2),
      doctest::Contains("apply_adjoint"), Error);
  NormEstimateOptions none;
  none.trials = 0;
  CHECK_THROWS_WITH_AS(
      operator_norm_estimate(ta, dim, L, 2.0, NormStrategy::random_family, none),
      doctest::Contains("at least one trial"), Error);
}
