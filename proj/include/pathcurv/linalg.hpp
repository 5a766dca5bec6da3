#pragma once

// Small dense linear algebra for manifold dimensions 1..4. Everything is
// stack-allocated with a fixed stride so the hot integration loop never
// touches the heap.

#include <array>
#include <cmath>
#include <cstdint>

namespace pathcurv {

inline constexpr int kMaxDim = 4;

struct Vec {
  int n = 0;
  std::array<double, kMaxDim> a{};

  double& operator[](int i) { return a[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return a[static_cast<std::size_t>(i)]; }

  static Vec zero(int n) {
    Vec v;
    v.n = n;
    return v;
  }
};

struct Mat {
  int n = 0;
  std::array<double, kMaxDim * kMaxDim> a{};

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i * kMaxDim + j)]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i * kMaxDim + j)]; }

  static Mat zero(int n) {
    Mat m;
    m.n = n;
    return m;
  }
  static Mat identity(int n) {
    Mat m = zero(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

// Rank-3 array for Christoffel symbols, G(k,i,j) = Gamma^k_{ij}.
struct Christoffel {
  int n = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> a{};

  double& operator()(int k, int i, int j) {
    return a[static_cast<std::size_t>((k * kMaxDim + i) * kMaxDim + j)];
  }
  double operator()(int k, int i, int j) const {
    return a[static_cast<std::size_t>((k * kMaxDim + i) * kMaxDim + j)];
  }

  static Christoffel zero(int n) {
    Christoffel g;
    g.n = n;
    return g;
  }
};

inline Vec operator+(const Vec& x, const Vec& y) {
  Vec r = x;
  for (int i = 0; i < x.n; ++i) r[i] += y[i];
  return r;
}

inline Vec operator-(const Vec& x, const Vec& y) {
  Vec r = x;
  for (int i = 0; i < x.n; ++i) r[i] -= y[i];
  return r;
}

inline Vec operator*(double c, const Vec& x) {
  Vec r = x;
  for (int i = 0; i < x.n; ++i) r[i] *= c;
  return r;
}

inline double dot(const Vec& x, const Vec& y) {
  double s = 0.0;
  for (int i = 0; i < x.n; ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

inline double norm_inf(const Vec& x) {
  double s = 0.0;
  for (int i = 0; i < x.n; ++i) s = std::max(s, std::fabs(x[i]));
  return s;
}

inline Mat operator+(const Mat& x, const Mat& y) {
  Mat r = x;
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) r(i, j) += y(i, j);
  return r;
}

inline Mat operator-(const Mat& x, const Mat& y) {
  Mat r = x;
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) r(i, j) -= y(i, j);
  return r;
}

inline Mat operator*(double c, const Mat& x) {
  Mat r = x;
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) r(i, j) *= c;
  return r;
}

inline Mat matmul(const Mat& x, const Mat& y) {
  Mat r = Mat::zero(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int k = 0; k < x.n; ++k) {
      const double xik = x(i, k);
      for (int j = 0; j < x.n; ++j) r(i, j) += xik * y(k, j);
    }
  return r;
}

inline Vec matvec(const Mat& m, const Vec& v) {
  Vec r = Vec::zero(m.n);
  for (int i = 0; i < m.n; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.n; ++j) s += m(i, j) * v[j];
    r[i] = s;
  }
  return r;
}

// m^T v, used for frame components of a cotangent vector: c = U^T df.
inline Vec matvec_t(const Mat& m, const Vec& v) {
  Vec r = Vec::zero(m.n);
  for (int j = 0; j < m.n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m.n; ++i) s += m(i, j) * v[i];
    r[j] = s;
  }
  return r;
}

inline Mat transpose(const Mat& m) {
  Mat r = Mat::zero(m.n);
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) r(i, j) = m(j, i);
  return r;
}

inline double norm_inf(const Mat& m) {
  double s = 0.0;
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) s = std::max(s, std::fabs(m(i, j)));
  return s;
}

// Cholesky factorization g = L L^T. Returns false when g is not positive
// definite (within roundoff).
inline bool cholesky(const Mat& g, Mat& L) {
  const int n = g.n;
  L = Mat::zero(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = g(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (s <= 0.0) return false;
        L(i, i) = std::sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }
  return true;
}

// Solve g x = b for SPD g via Cholesky. Returns false on singular g.
inline bool solve_spd(const Mat& g, const Vec& b, Vec& x) {
  Mat L;
  if (!cholesky(g, L)) return false;
  const int n = g.n;
  Vec y = Vec::zero(n);
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= L(i, k) * y[k];
    y[i] = s / L(i, i);
  }
  x = Vec::zero(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= L(k, i) * x[k];
    x[i] = s / L(i, i);
  }
  return true;
}

inline bool invert(const Mat& m, Mat& inv) {
  // Gauss-Jordan with partial pivoting; n <= 4 so cost is irrelevant.
  const int n = m.n;
  Mat a = m;
  inv = Mat::identity(n);
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a(r, col)) > std::fabs(a(piv, col))) piv = r;
    if (a(piv, col) == 0.0) return false;
    if (piv != col)
      for (int j = 0; j < n; ++j) {
        std::swap(a.a[piv * kMaxDim + j], a.a[col * kMaxDim + j]);
        std::swap(inv.a[piv * kMaxDim + j], inv.a[col * kMaxDim + j]);
      }
    const double d = 1.0 / a(col, col);
    for (int j = 0; j < n; ++j) {
      a(col, j) *= d;
      inv(col, j) *= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        a(r, j) -= f * a(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return true;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline Vec sym_eigenvalues(Mat m) {
  const int n = m.n;
  for (int sweep = 0; sweep < 32; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::fabs(m(p, q)) < 1e-300) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * m(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
      }
  }
  Vec ev = Vec::zero(n);
  for (int i = 0; i < n; ++i) ev[i] = m(i, i);
  // ascending
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (ev[j] < ev[i]) std::swap(ev.a[i], ev.a[j]);
  return ev;
}

// Operator 2-norm via eigenvalues of m^T m.
inline double op_norm(const Mat& m) {
  const Mat mtm = matmul(transpose(m), m);
  const Vec ev = sym_eigenvalues(mtm);
  return std::sqrt(std::max(0.0, ev[m.n - 1]));
}

}  // namespace pathcurv
