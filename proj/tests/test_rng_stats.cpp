#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "pathcurv/linalg.hpp"
#include "pathcurv/rng.hpp"
#include "pathcurv/stats.hpp"

using namespace pathcurv;

TEST_CASE("philox reference vectors") {
  // Published known-answer vectors for the ten-round 4x32 variant; pins the
  // generator across compilers and platforms.
  const Counter4 z = philox4x32(0, Counter4{0, 0, 0, 0});
  CHECK(z.v0 == 0x6627e8d5u);
  CHECK(z.v1 == 0xe169c58du);
  CHECK(z.v2 == 0xbc57ac4cu);
  CHECK(z.v3 == 0x9b00dbd8u);

  const Counter4 o = philox4x32(0xffffffffffffffffull,
                                Counter4{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu});
  CHECK(o.v0 == 0x408f276du);
  CHECK(o.v1 == 0x41c83b0eu);
  CHECK(o.v2 == 0xa20bc7c6u);
  CHECK(o.v3 == 0x6d5451fdu);

  const Counter4 p = philox4x32(0x299f31d0a4093822ull,
                                Counter4{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u});
  CHECK(p.v0 == 0xd16cfe09u);
  CHECK(p.v1 == 0x94fdccebu);
  CHECK(p.v2 == 0x5001e420u);
  CHECK(p.v3 == 0x24126ea1u);
}

TEST_CASE("draws are pure functions of their coordinates") {
  const NormalPair a = normal_pair(42, 7, 3, 1);
  const NormalPair b = normal_pair(42, 7, 3, 1);
  CHECK(a.z0 == b.z0);
  CHECK(a.z1 == b.z1);

  // any coordinate change decorrelates
  CHECK(normal_pair(43, 7, 3, 1).z0 != a.z0);
  CHECK(normal_pair(42, 8, 3, 1).z0 != a.z0);
  CHECK(normal_pair(42, 7, 4, 1).z0 != a.z0);
  CHECK(normal_pair(42, 7, 3, 2).z0 != a.z0);

  double z4[4];
  fill_normals(42, 7, 3, z4, 4);
  const NormalPair p0 = normal_pair(42, 7, 3, 0);
  const NormalPair p1 = normal_pair(42, 7, 3, 1);
  CHECK(z4[0] == p0.z0);
  CHECK(z4[1] == p0.z1);
  CHECK(z4[2] == p1.z0);
  CHECK(z4[3] == p1.z1);
}

TEST_CASE("derive_stream separates and is deterministic") {
  CHECK(derive_stream(1, 2) == derive_stream(1, 2));
  CHECK(derive_stream(1, 2) != derive_stream(2, 1));
  CHECK(derive_stream(0, 0) != 0);
  CHECK(mix64(0x12345) == mix64(0x12345));
  // splitmix64 finalizer reference value at zero input
  CHECK(mix64(0) == 0xe220a8397b1dcdafull);
}

TEST_CASE("normal moments") {
  const std::uint64_t n = 200000;
  ScalarAcc m1, m2, m3, m4;
  ScalarAcc cross;
  for (std::uint64_t i = 0; i < n; ++i) {
    const NormalPair p = normal_pair(99, 1, static_cast<std::uint32_t>(i), 0);
    for (double z : {p.z0, p.z1}) {
      m1.add(z);
      m2.add(z * z);
      m3.add(z * z * z);
      m4.add(z * z * z * z);
    }
    cross.add(p.z0 * p.z1);
  }
  CHECK(std::fabs(m1.mean()) < 4.0 * m1.std_error());
  CHECK(std::fabs(m2.mean() - 1.0) < 4.0 * m2.std_error());
  CHECK(std::fabs(m3.mean()) < 4.0 * m3.std_error());
  CHECK(std::fabs(m4.mean() - 3.0) < 4.0 * m4.std_error());
  CHECK(std::fabs(cross.mean()) < 4.0 * cross.std_error());
}

TEST_CASE("uniform01 range and moments") {
  const std::uint64_t n = 200000;
  ScalarAcc m1, m2;
  for (std::uint64_t i = 0; i < n; ++i) {
    const double u = uniform01(7, 7, static_cast<std::uint32_t>(i), 0);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    m1.add(u);
    m2.add(u * u);
  }
  CHECK(std::fabs(m1.mean() - 0.5) < 4.0 * m1.std_error());
  CHECK(std::fabs(m2.mean() - 1.0 / 3.0) < 4.0 * m2.std_error());
}

TEST_CASE("kahan summation keeps lost bits") {
  KahanSum k;
  double naive = 1.0;
  k.add(1.0);
  for (int i = 0; i < 1000000; ++i) {
    k.add(1e-16);
    naive += 1e-16;
  }
  CHECK(naive == 1.0);  // every term rounds away
  CHECK(k.value() == doctest::Approx(1.0 + 1e-10).epsilon(1e-12));

  KahanSum a, b;
  a.add(0.1);
  a.add(0.2);
  b.add(0.3);
  a.merge(b);
  CHECK(a.value() == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("scalar accumulator against hand-computed values") {
  ScalarAcc acc;
  for (double x : {1.0, 2.0, 3.0, 6.0}) acc.add(x);
  CHECK(acc.n == 4);
  CHECK(acc.mean() == doctest::Approx(3.0).epsilon(1e-15));
  // sample variance of {1,2,3,6}: mean 3, squared residuals 4+1+0+9 = 14, /3
  CHECK(acc.variance() == doctest::Approx(14.0 / 3.0).epsilon(1e-13));
  CHECK(acc.std_error() == doctest::Approx(std::sqrt(14.0 / 3.0 / 4.0)).epsilon(1e-13));

  // merge of a partition reproduces the whole
  ScalarAcc left, right;
  left.add(1.0);
  left.add(2.0);
  right.add(3.0);
  right.add(6.0);
  left.merge(right);
  CHECK(left.mean() == acc.mean());
  CHECK(left.variance() == doctest::Approx(acc.variance()).epsilon(1e-15));
}

TEST_CASE("unbiased mean squared is the pair u-statistic") {
  ScalarAcc acc;
  for (double x : {1.0, 2.0, 3.0}) acc.add(x);
  // mean over ordered pairs i != j of x_i x_j: (1*2 + 1*3 + 2*3) / 3
  CHECK(unbiased_mean_squared(acc) == doctest::Approx(11.0 / 3.0).epsilon(1e-14));

  // unbiasedness: E over a synthetic ensemble approaches the true square
  ScalarAcc outer;
  for (int rep = 0; rep < 20000; ++rep) {
    ScalarAcc inner;
    for (int i = 0; i < 4; ++i)
      inner.add(1.5 + normal_pair(3, 11, static_cast<std::uint32_t>(rep),
                                  static_cast<std::uint32_t>(i))
                          .z0);
    outer.add(unbiased_mean_squared(inner));
  }
  CHECK(std::fabs(outer.mean() - 2.25) < 4.0 * outer.std_error());
}

TEST_CASE("vector accumulator covariance") {
  VecAcc acc(2);
  const double xs[4][2] = {{1.0, 0.0}, {2.0, 1.0}, {3.0, 1.0}, {6.0, 4.0}};
  for (const auto& row : xs) {
    Vec v = Vec::zero(2);
    v[0] = row[0];
    v[1] = row[1];
    acc.add(v);
  }
  const Vec m = acc.mean();
  CHECK(m[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(m[1] == doctest::Approx(1.5).epsilon(1e-15));

  // residuals0 = {-2,-1,0,3}, residuals1 = {-1.5,-0.5,-0.5,2.5}:
  // var0 = 14/3, var1 = 3, cov = (3 + 0.5 + 0 + 7.5)/3 = 11/3
  const Mat c = acc.mean_covariance();  // sample covariance / n
  CHECK(c(0, 0) == doctest::Approx(14.0 / 3.0 / 4.0).epsilon(1e-13));
  CHECK(c(1, 1) == doctest::Approx(3.0 / 4.0).epsilon(1e-13));
  CHECK(c(0, 1) == doctest::Approx(11.0 / 3.0 / 4.0).epsilon(1e-13));
  CHECK(c(1, 0) == doctest::Approx(c(0, 1)).epsilon(1e-15));

  CHECK(acc.component_std_error()[0] == doctest::Approx(std::sqrt(14.0 / 12.0)).epsilon(1e-13));

  // merge equivalence
  VecAcc a(2), b(2);
  for (int i = 0; i < 4; ++i) {
    Vec v = Vec::zero(2);
    v[0] = xs[i][0];
    v[1] = xs[i][1];
    (i < 2 ? a : b).add(v);
  }
  a.merge(b);
  CHECK(norm_inf(a.mean() - acc.mean()) == 0.0);
  CHECK(norm_inf(a.mean_covariance() - acc.mean_covariance()) < 1e-15);
}

TEST_CASE("delta-method stderr of |mean|^p") {
  // against a brute-force evaluation of grad^T cov grad
  VecAcc acc(2);
  for (int i = 0; i < 500; ++i) {
    const NormalPair p = normal_pair(5, 21, static_cast<std::uint32_t>(i), 0);
    Vec v = Vec::zero(2);
    v[0] = 2.0 + 0.3 * p.z0;
    v[1] = -1.0 + 0.5 * p.z1;
    acc.add(v);
  }
  for (double pw : {1.0, 1.5, 2.0}) {
    const Vec m = acc.mean();
    const double r = norm2(m);
    const Mat c = acc.mean_covariance();
    Vec g = Vec::zero(2);
    for (int i = 0; i < 2; ++i) g[i] = pw * std::pow(r, pw - 2.0) * m[i];
    double var = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) var += g[i] * c(i, j) * g[j];
    CHECK(norm_power_std_error(acc, pw) == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  }
  // p = 2 sanity: d|m|^2 has closed form 2 m, so a 1-d check is exact
  VecAcc one(1);
  for (double x : {1.0, 3.0}) {
    Vec v = Vec::zero(1);
    v[0] = x;
    one.add(v);
  }
  // mean 2, sample var 2, mean var 1, grad 2*2 = 4 -> stderr 4
  CHECK(norm_power_std_error(one, 2.0) == doctest::Approx(4.0).epsilon(1e-13));
}
