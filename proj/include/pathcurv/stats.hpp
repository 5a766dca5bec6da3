#pragma once

// Compensated (Neumaier) accumulators. All estimator reductions go through
// these so that per-block partial sums merged in block order give the same
// bits for any worker count.

#include <cmath>
#include <cstdint>

#include "pathcurv/linalg.hpp"

namespace pathcurv {

struct KahanSum {
  double s = 0.0;
  double c = 0.0;

  void add(double x) {
    const double t = s + x;
    if (std::fabs(s) >= std::fabs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  void merge(const KahanSum& o) {
    add(o.s);
    add(o.c);
  }
  double value() const { return s + c; }
};

struct ScalarAcc {
  KahanSum sum;
  KahanSum sumsq;
  std::uint64_t n = 0;

  void add(double x) {
    sum.add(x);
    sumsq.add(x * x);
    ++n;
  }
  void merge(const ScalarAcc& o) {
    sum.merge(o.sum);
    sumsq.merge(o.sumsq);
    n += o.n;
  }
  double mean() const { return n ? sum.value() / static_cast<double>(n) : 0.0; }
  double variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double v = (sumsq.value() - static_cast<double>(n) * m * m) /
                     static_cast<double>(n - 1);
    return v > 0.0 ? v : 0.0;
  }
  double std_error() const {
    return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
  }
};

// Vector samples with full second moments; covariance of the sample mean is
// what the delta method needs for |mean|^p style statistics.
struct VecAcc {
  int dim = 0;
  KahanSum sum[kMaxDim];
  KahanSum cross[kMaxDim * kMaxDim];
  std::uint64_t n = 0;

  explicit VecAcc(int d = 0) : dim(d) {}

  void add(const Vec& v) {
    for (int i = 0; i < dim; ++i) {
      sum[i].add(v[i]);
      for (int j = 0; j < dim; ++j) cross[i * kMaxDim + j].add(v[i] * v[j]);
    }
    ++n;
  }
  void merge(const VecAcc& o) {
    for (int i = 0; i < dim; ++i) {
      sum[i].merge(o.sum[i]);
      for (int j = 0; j < dim; ++j) cross[i * kMaxDim + j].merge(o.cross[i * kMaxDim + j]);
    }
    n += o.n;
  }
  Vec mean() const {
    Vec m = Vec::zero(dim);
    for (int i = 0; i < dim; ++i)
      m[i] = n ? sum[i].value() / static_cast<double>(n) : 0.0;
    return m;
  }
  // Covariance of the sample mean (sample covariance / n).
  Mat mean_covariance() const {
    Mat c = Mat::zero(dim);
    if (n < 2) return c;
    const Vec m = mean();
    const double dn = static_cast<double>(n);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        double cij = (cross[i * kMaxDim + j].value() - dn * m[i] * m[j]) / (dn - 1.0);
        c(i, j) = cij / dn;
      }
    return c;
  }
  Vec component_std_error() const {
    const Mat c = mean_covariance();
    Vec se = Vec::zero(dim);
    for (int i = 0; i < dim; ++i) se[i] = std::sqrt(c(i, i) > 0 ? c(i, i) : 0.0);
    return se;
  }
};

// Std error of |mean|^p by the delta method: grad = p |m|^(p-2) m.
inline double norm_power_std_error(const VecAcc& acc, double p) {
  const Vec m = acc.mean();
  const double r = norm2(m);
  if (r == 0.0 || acc.n < 2) return 0.0;
  Vec g = Vec::zero(acc.dim);
  const double f = p * std::pow(r, p - 2.0);
  for (int i = 0; i < acc.dim; ++i) g[i] = f * m[i];
  const Mat c = acc.mean_covariance();
  double var = 0.0;
  for (int i = 0; i < acc.dim; ++i)
    for (int j = 0; j < acc.dim; ++j) var += g[i] * c(i, j) * g[j];
  return std::sqrt(var > 0 ? var : 0.0);
}

// Unbiased estimator of (E F)^2 from the sample sum and sum of squares:
// (S^2 - sum x_i^2) / (n (n-1)).
inline double unbiased_mean_squared(const ScalarAcc& acc) {
  if (acc.n < 2) return 0.0;
  const double s = acc.sum.value();
  const double dn = static_cast<double>(acc.n);
  return (s * s - acc.sumsq.value()) / (dn * (dn - 1.0));
}

}  // namespace pathcurv
