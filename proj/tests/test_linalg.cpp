#include "doctest.h"
#include "dyadicw/linalg.hpp"
#include "helpers.hpp"

using namespace dyadicw;
using testutil::mat2;
using testutil::max_diff;
using testutil::random_mat;
using testutil::random_orthogonal;
using testutil::random_spd;
using testutil::vec2;
using testutil::vec3;

TEST_CASE("vector arithmetic, dot products, unit vectors") {
  Vec a = vec3(1, 2, 3), b = vec3(-1, 0.5, 2);
  CHECK(a.dot(b) == doctest::Approx(6.0));
  CHECK(vec2(3, 4).norm() == doctest::Approx(5.0));
  CHECK(max_diff(a + b, vec3(0, 2.5, 5)) == 0.0);
  CHECK(max_diff(a - b, vec3(2, 1.5, 1)) == 0.0);
  CHECK(max_diff(2.0 * a, vec3(2, 4, 6)) == 0.0);
  Vec e1 = Vec::unit(3, 1);
  CHECK(e1[0] == 0.0);
  CHECK(e1[1] == 1.0);
  CHECK(e1.norm() == 1.0);
  CHECK_THROWS_AS(Vec(5), Error);
  CHECK_THROWS_AS(Vec(0), Error);
  CHECK_THROWS_AS(Vec::unit(2, 2), Error);
}

TEST_CASE("matrix constructors and products") {
  Mat id = Mat::identity(3);
  Mat d = Mat::diag(vec2(2, 3));
  CHECK(d(0, 0) == 2.0);
  CHECK(d(1, 1) == 3.0);
  CHECK(d(0, 1) == 0.0);
  Mat r = Mat::rotation2(0.3);
  CHECK(max_diff(r * r.transpose(), Mat::identity(2)) < 1e-15);

  Rng rng(11);
  Mat a = random_mat(rng, 3), b = random_mat(rng, 3), c = random_mat(rng, 3);
  CHECK(max_diff((a * b) * c, a * (b * c)) < 1e-13);
  CHECK(max_diff(a * id, a) == 0.0);
  CHECK(max_diff((a * b).transpose(), b.transpose() * a.transpose()) < 1e-14);

  Vec x = vec3(0.3, -0.7, 1.1);
  Vec lhs = (a * b) * x, rhs = a * (b * x);
  CHECK(max_diff(lhs, rhs) < 1e-13);

  CHECK(mat2(1, 2, 2, 1).is_symmetric());
  CHECK_FALSE(mat2(1, 2, 3, 1).is_symmetric());
  CHECK(mat2(1, 2, 3, 4) == mat2(1, 2, 3, 4));
  CHECK_FALSE(mat2(1, 2, 3, 4) == mat2(1, 2, 3, 4.0000001));
}

TEST_CASE("determinant and inverse via LU") {
  CHECK(det(Mat::diag(vec2(2, 3))) == doctest::Approx(6.0));
  CHECK(det(Mat::rotation2(0.7)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(det(mat2(1, 2, 3, 4)) == doctest::Approx(-2.0));
  CHECK(det(mat2(1, 2, 2, 4)) == 0.0);  // rank one
  CHECK_THROWS_WITH_AS(inverse(mat2(1, 2, 2, 4)), doctest::Contains("singular"),
                       Error);

  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 3ULL);
    Mat a = random_spd(rng, n) + Mat::identity(n) * 0.2;
    CHECK(max_diff(a * inverse(a), Mat::identity(n)) < 1e-11);
    CHECK(max_diff(inverse(a) * a, Mat::identity(n)) < 1e-11);
    // det is multiplicative
    Mat b = random_spd(rng, n) + Mat::identity(n) * 0.2;
    CHECK(det(a * b) == doctest::Approx(det(a) * det(b)).epsilon(1e-10));
  }
}

TEST_CASE("symmetric eigendecomposition") {
  auto e = eigen_sym(mat2(2, 1, 1, 2));
  CHECK(e.values[0] == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(e.values[1] == doctest::Approx(1.0).epsilon(1e-13));

  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 3ULL);
    Mat s = random_mat(rng, n);
    s = s + s.transpose();
    auto es = eigen_sym(s);
    // orthonormal eigenbasis
    CHECK(max_diff(es.vectors.transpose() * es.vectors, Mat::identity(n)) < 1e-13);
    // reconstruction Q diag Q^T
    Mat lam(n);
    for (int i = 0; i < n; ++i) lam(i, i) = es.values[i];
    CHECK(max_diff(es.vectors * lam * es.vectors.transpose(), s) <
          1e-12 * std::max(s.frobenius(), 1.0));
    // descending order
    for (int i = 0; i + 1 < n; ++i) CHECK(es.values[i] >= es.values[i + 1]);
  }
  CHECK_THROWS_WITH_AS(eigen_sym(mat2(1, 2, 3, 4)),
                       doctest::Contains("symmetric"), Error);
}

TEST_CASE("spd fractional powers") {
  Mat id = Mat::identity(3);
  CHECK(max_diff(spd_power(id, 0.37), id) < 1e-15);
  CHECK(max_diff(spd_power(Mat::diag(vec2(4, 9)), 0.5), Mat::diag(vec2(2, 3))) <
        1e-14);

  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 3ULL);
    Mat m = random_spd(rng, n, 0.2);
    const double scale = op_norm(m);

    Mat third = spd_power(m, 1.0 / 3.0);
    CHECK(max_diff(third * third * third, m) < 1e-9 * scale);

    CHECK(max_diff(spd_power(m, 1.0), m) < 1e-12 * scale);
    CHECK(max_diff(spd_power(spd_power(m, 0.4), 1.0 / 0.4), m) < 1e-9 * scale);

    // group law on commuting powers
    Mat lhs = spd_power(m, 0.7);
    Mat rhs = spd_power(m, 0.3) * spd_power(m, 0.4);
    CHECK(max_diff(lhs, rhs) < 1e-9 * std::max(op_norm(lhs), 1.0));

    Mat inv = spd_power(m, -1.0);
    CHECK(max_diff(inv * m, Mat::identity(n)) < 1e-10 * std::max(scale, 1.0));
  }

  // 1x1 path
  Mat one(1);
  one(0, 0) = 8.0;
  CHECK(spd_power(one, 1.0 / 3.0)(0, 0) == doctest::Approx(2.0));
  one(0, 0) = -1.0;
  CHECK_THROWS_AS(spd_power(one, 0.5), Error);

  CHECK_THROWS_WITH_AS(spd_power(mat2(1, 2, 2, 1), 0.5),
                       doctest::Contains("positive definite"), Error);
  CHECK_THROWS_AS(spd_power(mat2(1, 2, 3, 1), 0.5), Error);

  CHECK_THROWS_WITH_AS(ensure_spd(mat2(1, 2, 2, 1), "test"),
                       doctest::Contains("positive definite"), Error);
  CHECK_NOTHROW(ensure_spd(mat2(2, 1, 1, 2), "test"));
}

TEST_CASE("spectral norm") {
  CHECK(op_norm(Mat::identity(2)) == doctest::Approx(1.0));
  CHECK(op_norm(mat2(0, 1, 1, 0)) == doctest::Approx(1.0));
  CHECK(op_norm(Mat::diag(vec2(-5, 3))) == doctest::Approx(5.0));
  CHECK(op_norm(mat2(0, 2, 0, 0)) == doctest::Approx(2.0));

  Mat one(1);
  one(0, 0) = -4.0;
  CHECK(op_norm(one) == 4.0);

  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 2ULL);
    Mat a = random_mat(rng, n), b = random_mat(rng, n);
    CHECK(op_norm(a * b) <= op_norm(a) * op_norm(b) * (1.0 + 1e-12) + 1e-14);
    // unitary invariance
    Mat q = random_orthogonal(rng, n);
    CHECK(op_norm(q * a) == doctest::Approx(op_norm(a)).epsilon(1e-11));
    CHECK(op_norm(a * q) == doctest::Approx(op_norm(a)).epsilon(1e-11));
  }

  // closed-form 2x2 path agrees with the Jacobi path on an embedded block
  for (int trial = 0; trial < 50; ++trial) {
    Mat a = random_mat(rng, 2, 3.0);
    Mat padded(3);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) padded(i, j) = a(i, j);
    CHECK(op_norm(a) == doctest::Approx(op_norm(padded)).epsilon(1e-11));
  }
}

TEST_CASE("smallest singular value") {
  CHECK(smallest_singular_value(Mat::diag(vec2(2, 3))) == doctest::Approx(2.0));
  CHECK(smallest_singular_value(mat2(1, 2, 2, 4)) == doctest::Approx(0.0).epsilon(1e-12));
  Rng rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    Mat a = random_spd(rng, 3) + Mat::identity(3) * 0.3;
    CHECK(smallest_singular_value(a) ==
          doctest::Approx(1.0 / op_norm(inverse(a))).epsilon(1e-9));
  }
}

TEST_CASE("determinant-norm bound predicate") {
  CHECK(det_norm_bound_check(Mat::identity(2), 1.0));
  CHECK(det_norm_bound_check(Mat::diag(vec2(1, 2)), 2.0));
  CHECK_FALSE(det_norm_bound_check(Mat::diag(vec2(1, 3)), 2.0));
  CHECK_THROWS_AS(det_norm_bound_check(Mat::identity(2), -0.5), Error);

  // randomized check of the implication: sigma_min >= 1 and |det A| <= delta
  // force ||A|| <= delta (delta = |det A| is the sharpest admissible choice)
  Rng rng(47);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 3ULL);
    Mat q1 = random_orthogonal(rng, n);
    Mat q2 = random_orthogonal(rng, n);
    Mat d(n);
    for (int i = 0; i < n; ++i) d(i, i) = 1.0 + 3.0 * rng.uniform();
    Mat a = q1 * d * q2.transpose();
    REQUIRE(smallest_singular_value(a) >= 1.0 - 1e-9);
    CHECK(det_norm_bound_check(a, std::abs(det(a))));
  }
}
