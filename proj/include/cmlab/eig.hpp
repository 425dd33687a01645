#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmlab/matrix.hpp"

namespace cmlab {
namespace detail {

// Osborne balancing: diagonal similarity that equalizes row and column norms.
inline void balance(Matrix& a) {
  const int n = a.side();
  const double radix = 2.0;
  bool done = false;
  while (!done) {
    done = true;
    for (int i = 0; i < n; ++i) {
      double r = 0.0, c = 0.0;
      for (int j = 0; j < n; ++j)
        if (j != i) {
          c += std::abs(a(j, i));
          r += std::abs(a(i, j));
        }
      if (c == 0.0 || r == 0.0) continue;
      double f = 1.0;
      const double s = c + r;
      double g = r / radix;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        const double ginv = 1.0 / f;
        for (int j = 0; j < n; ++j) a(i, j) *= ginv;
        for (int j = 0; j < n; ++j) a(j, i) *= f;
      }
    }
  }
}

// Householder reduction to upper Hessenberg form (orthogonal similarity).
inline void hessenberg_reduce(Matrix& a) {
  const int n = a.side();
  std::vector<double> u(static_cast<std::size_t>(n));
  for (int k = 0; k + 2 < n; ++k) {
    double scale = 0.0;
    for (int i = k + 1; i < n; ++i) scale = std::max(scale, std::abs(a(i, k)));
    if (scale == 0.0) continue;
    double sq = 0.0;
    for (int i = k + 1; i < n; ++i) {
      u[i] = a(i, k) / scale;
      sq += u[i] * u[i];
    }
    double sigma = std::sqrt(sq);
    if (u[k + 1] < 0.0) sigma = -sigma;
    u[k + 1] += sigma;
    const double beta = 1.0 / (sigma * u[k + 1]);  // 2 / u'u

    // A <- (I - beta u u') A
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = k + 1; i < n; ++i) s += u[i] * a(i, j);
      s *= beta;
      for (int i = k + 1; i < n; ++i) a(i, j) -= s * u[i];
    }
    // A <- A (I - beta u u')
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = k + 1; j < n; ++j) s += a(i, j) * u[j];
      s *= beta;
      for (int j = k + 1; j < n; ++j) a(i, j) -= s * u[j];
    }
    a(k + 1, k) = -sigma * scale;
    for (int i = k + 2; i < n; ++i) a(i, k) = 0.0;
  }
}

// Francis double-shift QR on an upper Hessenberg matrix (classic hqr).
// max_sweeps caps the total number of implicit QR sweeps across all
// deflations.
inline std::vector<std::complex<double>> hqr(Matrix& a, int max_sweeps) {
  const int n = a.side();
  std::vector<std::complex<double>> wri(static_cast<std::size_t>(n));
  double anorm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));
  if (anorm == 0.0) return wri;

  int nn = n - 1;
  double t = 0.0;
  int sweeps = 0;
  while (nn >= 0) {
    int its = 0;
    int l;
    do {
      for (l = nn; l >= 1; --l) {
        double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) <= DBL_EPSILON * s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      double x = a(nn, nn);
      if (l == nn) {
        wri[nn--] = x + t;
      } else {
        double y = a(nn - 1, nn - 1);
        double w = a(nn, nn - 1) * a(nn - 1, nn);
        if (l == nn - 1) {
          double p = 0.5 * (y - x);
          const double q = p * p + w;
          double z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + (p >= 0.0 ? z : -z);
            wri[nn - 1] = wri[nn] = x + z;
            if (z != 0.0) wri[nn] = x - w / z;
          } else {
            wri[nn - 1] = {x + p, z};
            wri[nn] = {x + p, -z};
          }
          nn -= 2;
        } else {
          if (++sweeps > max_sweeps)
            throw std::runtime_error("eigenvalues: QR failed to converge within " +
                                     std::to_string(max_sweeps) + " sweeps (side " +
                                     std::to_string(n) + ")");
          if (its != 0 && its % 10 == 0) {
            t += x;
            for (int i = 0; i <= nn; ++i) a(i, i) -= x;
            const double s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m;
          double p = 0.0, q = 0.0, r = 0.0;
          for (m = nn - 2; m >= l; --m) {
            const double z = a(m, m);
            const double rr = x - z;
            const double ss = y - z;
            p = (rr * ss - w) / a(m + 1, m) + a(m, m + 1);
            q = a(m + 1, m + 1) - z - rr - ss;
            r = a(m + 2, m + 1);
            const double sc = std::abs(p) + std::abs(q) + std::abs(r);
            if (sc != 0.0) {
              p /= sc;
              q /= sc;
              r /= sc;
            }
            if (m == l) break;
            const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v =
                std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
            if (u <= DBL_EPSILON * v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a(i, i - 2) = 0.0;
            if (i != m + 2) a(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a(k, k - 1);
              q = a(k + 1, k - 1);
              r = (k != nn - 1) ? a(k + 2, k - 1) : 0.0;
              x = std::abs(p) + std::abs(q) + std::abs(r);
              if (x != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            double s = std::sqrt(p * p + q * q + r * r);
            if (p < 0.0) s = -s;
            if (s == 0.0) continue;
            if (k == m) {
              if (l != m) a(k, k - 1) = -a(k, k - 1);
            } else {
              a(k, k - 1) = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            const double z = r / s;
            q /= p;
            r /= p;
            for (int j = k; j <= nn; ++j) {
              double pp = a(k, j) + q * a(k + 1, j);
              if (k != nn - 1) {
                pp += r * a(k + 2, j);
                a(k + 2, j) -= pp * z;
              }
              a(k + 1, j) -= pp * y;
              a(k, j) -= pp * x;
            }
            const int mmin = std::min(nn, k + 3);
            for (int i = l; i <= mmin; ++i) {
              double pp = x * a(i, k) + y * a(i, k + 1);
              if (k != nn - 1) {
                pp += z * a(i, k + 2);
                a(i, k + 2) -= pp * r;
              }
              a(i, k + 1) -= pp * q;
              a(i, k) -= pp;
            }
          }
        }
      }
    } while (l < nn - 1);
  }
  return wri;
}

}  // namespace detail

// All eigenvalues of a real dense matrix: balance, Householder Hessenberg
// reduction, then Francis double-shift QR. Throws std::runtime_error if the
// QR iteration does not converge within 100 * side sweeps.
inline std::vector<std::complex<double>> eigenvalues(Matrix a) {
  if (!a.all_finite()) throw std::invalid_argument("eigenvalues: non-finite entries");
  if (a.side() == 0) return {};
  detail::balance(a);
  detail::hessenberg_reduce(a);
  return detail::hqr(a, 100 * a.side());
}

inline double spectral_radius(const Matrix& a) {
  double r = 0.0;
  for (const auto& ev : eigenvalues(a)) r = std::max(r, std::abs(ev));
  return r;
}

// Upper bound ||A^{2^k}||_2^{1/2^k} computed by repeated squaring with
// renormalization at every step. Non-increasing in k and converges to the
// spectral radius from above.
inline double gelfand_bound(const Matrix& a, int doublings = 12) {
  if (!a.all_finite()) throw std::invalid_argument("gelfand_bound: non-finite entries");
  double s = spectral_norm(a);
  if (s == 0.0) return 0.0;
  Matrix m(a);
  m *= 1.0 / s;
  double log_norm = std::log(s);
  for (int k = 1; k <= doublings; ++k) {
    m = m * m;
    s = spectral_norm(m);
    if (s == 0.0) return 0.0;
    m *= 1.0 / s;
    log_norm = 2.0 * log_norm + std::log(s);
  }
  return std::exp(log_norm / std::pow(2.0, doublings));
}

// QR spectral radius cross-checked against the Gelfand iterate. The two
// routes must agree within tol, scaled by the radius when it exceeds one
// (the norm iterate converges relatively). Near-defective matrices can
// exceed a tight tolerance because the iterate slows to n^(1/n) there, so
// sweeps over arbitrary parameter grids use spectral_radius directly.
inline double spectral_radius_checked(const Matrix& a, double tol = 1e-3) {
  const double rho = spectral_radius(a);
  const double bound = gelfand_bound(a);
  if (std::abs(bound - rho) > tol * std::max(1.0, rho))
    throw std::runtime_error("spectral_radius_checked: QR value " + std::to_string(rho) +
                             " vs Gelfand bound " + std::to_string(bound) +
                             " disagree beyond " + std::to_string(tol));
  return rho;
}

}  // namespace cmlab
