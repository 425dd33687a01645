#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "cmlab/rng.hpp"
#include "cmlab/vec.hpp"

namespace cmlab {

// Dense square matrix, row-major. Sized for the small systems this library
// analyzes (sides up to a few dozen).
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(int n) : n_(n), a_(static_cast<std::size_t>(n) * n, 0.0) {
    if (n < 0) throw std::invalid_argument("matrix: negative side");
  }

  static Matrix identity(int n) {
    Matrix m(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int side() const { return n_; }

  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }

  Matrix operator*(const Matrix& o) const {
    if (n_ != o.n_) throw std::invalid_argument("matrix multiply: size mismatch");
    Matrix r(n_);
    for (int i = 0; i < n_; ++i)
      for (int k = 0; k < n_; ++k) {
        const double aik = (*this)(i, k);
        if (aik == 0.0) continue;
        for (int j = 0; j < n_; ++j) r(i, j) += aik * o(k, j);
      }
    return r;
  }

  Matrix& operator*=(double c) {
    for (double& x : a_) x *= c;
    return *this;
  }

  bool all_finite() const {
    for (double x : a_)
      if (!std::isfinite(x)) return false;
    return true;
  }

 private:
  int n_ = 0;
  std::vector<double> a_;
};

inline Vec mat_vec(const Matrix& a, const Vec& x) {
  const int n = a.side();
  if (static_cast<int>(x.size()) != n) throw std::invalid_argument("mat_vec: size mismatch");
  Vec r(x.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += a(i, j) * x[j];
    r[i] = s;
  }
  return r;
}

inline Vec mat_transpose_vec(const Matrix& a, const Vec& x) {
  const int n = a.side();
  if (static_cast<int>(x.size()) != n)
    throw std::invalid_argument("mat_transpose_vec: size mismatch");
  Vec r(x.size(), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r[j] += a(i, j) * x[i];
  return r;
}

// Largest singular value by power iteration on A'A with a fixed seeded start.
inline double spectral_norm(const Matrix& a) {
  const int n = a.side();
  if (n == 0) return 0.0;
  SplitMix64 rng(0x5EEDBA5EULL);
  Vec v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.normal();
  double nv = norm2(v);
  if (nv == 0.0) v[0] = nv = 1.0;
  for (double& x : v) x /= nv;

  double sigma = 0.0;
  for (int iter = 0; iter < 500; ++iter) {
    const Vec w = mat_vec(a, v);
    const double est = norm2(w);
    if (est == 0.0) return 0.0;
    Vec u = mat_transpose_vec(a, w);
    const double nu = norm2(u);
    if (nu == 0.0) return est;
    for (std::size_t i = 0; i < u.size(); ++i) v[i] = u[i] / nu;
    if (std::abs(est - sigma) <= 1e-13 * std::max(1.0, est)) return est;
    sigma = est;
  }
  return sigma;
}

}  // namespace cmlab
