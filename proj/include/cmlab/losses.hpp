#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmlab/vec.hpp"

namespace cmlab {

struct GradReport {
  double max_rel_error = 0.0;
  int worst_coordinate = -1;
};

// An objective over a flat parameter vector. Value and gradient are analytic;
// the Hessian-vector product falls back to a central difference of gradients
// unless a surface provides it in closed form. Surfaces are immutable after
// construction and may be evaluated concurrently.
class LossSurface {
 public:
  virtual ~LossSurface() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;

  // Per-coordinate closed interval used when sampling initial points.
  virtual std::array<double, 2> domain_bounds() const = 0;

  double value(const Vec& theta) const {
    check_dim(theta);
    const double v = value_impl(theta);
    if (!std::isfinite(v)) throw std::domain_error(name() + ": non-finite loss value");
    return v;
  }

  Vec gradient(const Vec& theta) const {
    check_dim(theta);
    return gradient_impl(theta);
  }

  // H(theta)*v. Default: (grad(theta + h v) - grad(theta - h v)) / (2h),
  // h = 1e-5 / max(1, ||v||).
  virtual Vec hessian_vec(const Vec& theta, const Vec& v) const {
    check_dim(theta);
    check_same_dim(theta, v, "hessian_vec");
    const double h = 1e-5 / std::max(1.0, norm2(v));
    Vec plus(theta), minus(theta);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      plus[i] += h * v[i];
      minus[i] -= h * v[i];
    }
    Vec gp = gradient_impl(plus), gm = gradient_impl(minus);
    Vec r(theta.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = (gp[i] - gm[i]) / (2.0 * h);
    return r;
  }

 protected:
  void check_dim(const Vec& theta) const {
    if (static_cast<int>(theta.size()) != dim())
      throw std::invalid_argument(name() + ": expected dimension " + std::to_string(dim()) +
                                  ", got " + std::to_string(theta.size()));
  }

  virtual double value_impl(const Vec& theta) const = 0;
  virtual Vec gradient_impl(const Vec& theta) const = 0;
};

// f(x,y) = -a exp(-b sqrt((x^2+y^2)/2)) - exp((cos(cx)+cos(cy))/2) + e + a
// with a=20, b=0.2, c=2*pi. Global minimum 0 at the origin.
class AckleyLoss final : public LossSurface {
 public:
  std::string name() const override { return "ackley"; }
  int dim() const override { return 2; }
  std::array<double, 2> domain_bounds() const override { return {-5.0, 5.0}; }

 private:
  static constexpr double kA = 20.0, kB = 0.2;
  static constexpr double kC = 2.0 * std::numbers::pi;

  double value_impl(const Vec& t) const override {
    const double x = t[0], y = t[1];
    const double r = std::sqrt(0.5 * (x * x + y * y));
    return -kA * std::exp(-kB * r) - std::exp(0.5 * (std::cos(kC * x) + std::cos(kC * y))) +
           std::numbers::e + kA;
  }

  Vec gradient_impl(const Vec& t) const override {
    const double x = t[0], y = t[1];
    const double r = std::sqrt(0.5 * (x * x + y * y));
    const double e1 = std::exp(-kB * r);
    const double e2 = std::exp(0.5 * (std::cos(kC * x) + std::cos(kC * y)));
    // The radial term is non-differentiable at the origin; the minimizer sits
    // there, so report the subgradient 0 for that term.
    double gx = 0.0, gy = 0.0;
    if (r > 0.0) {
      gx = kA * kB * e1 * 0.5 * x / r;
      gy = kA * kB * e1 * 0.5 * y / r;
    }
    gx += 0.5 * kC * std::sin(kC * x) * e2;
    gy += 0.5 * kC * std::sin(kC * y) * e2;
    return {gx, gy};
  }
};

// Log-rescaled Goldstein-Price:
//   f = (log[(1 + u^2 P)(30 + w^2 Q)] - 8.693) / 2.427
// with u = x+y+1, w = 2x-3y and the classic quartic factors P, Q.
// Global minimum at (0, -1).
class GoldsteinPriceLoss final : public LossSurface {
 public:
  std::string name() const override { return "gp"; }
  int dim() const override { return 2; }
  std::array<double, 2> domain_bounds() const override { return {-2.0, 2.0}; }

 private:
  static void factors(double x, double y, double& a, double& b) {
    const double u = x + y + 1.0;
    const double p = 19.0 - 14.0 * x + 3.0 * x * x - 14.0 * y + 6.0 * x * y + 3.0 * y * y;
    const double w = 2.0 * x - 3.0 * y;
    const double q = 18.0 - 32.0 * x + 12.0 * x * x + 48.0 * y - 36.0 * x * y + 27.0 * y * y;
    a = 1.0 + u * u * p;
    b = 30.0 + w * w * q;
  }

  double value_impl(const Vec& t) const override {
    double a, b;
    factors(t[0], t[1], a, b);
    if (a * b <= 0.0) throw std::domain_error("gp: log of non-positive product");
    return (std::log(a * b) - 8.693) / 2.427;
  }

  Vec gradient_impl(const Vec& t) const override {
    const double x = t[0], y = t[1];
    const double u = x + y + 1.0;
    const double p = 19.0 - 14.0 * x + 3.0 * x * x - 14.0 * y + 6.0 * x * y + 3.0 * y * y;
    const double w = 2.0 * x - 3.0 * y;
    const double q = 18.0 - 32.0 * x + 12.0 * x * x + 48.0 * y - 36.0 * x * y + 27.0 * y * y;
    const double a = 1.0 + u * u * p;
    const double b = 30.0 + w * w * q;
    const double pd = -14.0 + 6.0 * x + 6.0 * y;  // dP/dx == dP/dy
    const double qx = -32.0 + 24.0 * x - 36.0 * y;
    const double qy = 48.0 - 36.0 * x + 54.0 * y;
    const double ax = 2.0 * u * p + u * u * pd;
    const double ay = ax;
    const double bx = 4.0 * w * q + w * w * qx;
    const double by = -6.0 * w * q + w * w * qy;
    return {(ax / a + bx / b) / 2.427, (ay / a + by / b) / 2.427};
  }
};

// Two-variable Levy function with w_i = 1 + (x_i - 1)/4. Global minimum 0 at (1,1).
class Levy2DLoss final : public LossSurface {
 public:
  std::string name() const override { return "levy"; }
  int dim() const override { return 2; }
  std::array<double, 2> domain_bounds() const override { return {-10.0, 10.0}; }

 private:
  static constexpr double kPi = std::numbers::pi;

  double value_impl(const Vec& t) const override {
    const double w1 = 1.0 + (t[0] - 1.0) / 4.0;
    const double w2 = 1.0 + (t[1] - 1.0) / 4.0;
    const double s1 = std::sin(kPi * w1);
    const double s2 = std::sin(kPi * w1 + 1.0);
    const double s3 = std::sin(2.0 * kPi * w2);
    return s1 * s1 + (w1 - 1.0) * (w1 - 1.0) * (1.0 + 10.0 * s2 * s2) +
           (w2 - 1.0) * (w2 - 1.0) * (1.0 + s3 * s3);
  }

  Vec gradient_impl(const Vec& t) const override {
    const double w1 = 1.0 + (t[0] - 1.0) / 4.0;
    const double w2 = 1.0 + (t[1] - 1.0) / 4.0;
    const double s2 = std::sin(kPi * w1 + 1.0);
    const double g1 = (2.0 * std::sin(kPi * w1) * std::cos(kPi * w1) * kPi +
                       2.0 * (w1 - 1.0) * (1.0 + 10.0 * s2 * s2) +
                       (w1 - 1.0) * (w1 - 1.0) * 20.0 * s2 * std::cos(kPi * w1 + 1.0) * kPi) *
                      0.25;
    const double s3 = std::sin(2.0 * kPi * w2);
    const double g2 = (2.0 * (w2 - 1.0) * (1.0 + s3 * s3) +
                       (w2 - 1.0) * (w2 - 1.0) * 2.0 * s3 * std::cos(2.0 * kPi * w2) * 2.0 * kPi) *
                      0.25;
    return {g1, g2};
  }
};

// Scaled Rosenbrock bowl with an oscillatory overlay.
class AckleyRosenbrockLoss final : public LossSurface {
 public:
  std::string name() const override { return "ackley_rosenbrock"; }
  int dim() const override { return 2; }
  std::array<double, 2> domain_bounds() const override { return {-2.0, 4.0}; }

 private:
  static constexpr double kC = 2.0 * std::numbers::pi;

  double value_impl(const Vec& t) const override {
    const double x = t[0], y = t[1];
    const double r = std::sqrt(0.5 * (x * x + y * y));
    return 0.05 * (1.0 - x) * (1.0 - x) + 0.05 * (y - x * x) * (y - x * x) +
           0.6 * (std::exp(-0.2 * r) - std::exp(0.5 * (std::cos(kC * x) + std::cos(kC * y))) +
                  std::numbers::e);
  }

  Vec gradient_impl(const Vec& t) const override {
    const double x = t[0], y = t[1];
    const double r = std::sqrt(0.5 * (x * x + y * y));
    const double e1 = std::exp(-0.2 * r);
    const double e2 = std::exp(0.5 * (std::cos(kC * x) + std::cos(kC * y)));
    double gx = -0.1 * (1.0 - x) - 0.2 * x * (y - x * x);
    double gy = 0.1 * (y - x * x);
    if (r > 0.0) {
      gx += 0.6 * (-0.2) * e1 * 0.5 * x / r;
      gy += 0.6 * (-0.2) * e1 * 0.5 * y / r;
    }
    gx += 0.6 * 0.5 * kC * std::sin(kC * x) * e2;
    gy += 0.6 * 0.5 * kC * std::sin(kC * y) * e2;
    return {gx, gy};
  }
};

// f_s(x) = sum_d min(x_d^2, s (x_d - 1)^2), s > 1. Two global minima: a flat
// one at the origin (curvature 2) and a sharp one at the all-ones point
// (curvature 2s). Ties between branches resolve to the x^2 branch.
class SharpFlatLoss final : public LossSurface {
 public:
  SharpFlatLoss(double s, int dim) : s_(s), dim_(dim) {
    if (!(s > 1.0)) throw std::invalid_argument("sharpflat: s must be > 1");
    if (dim < 1) throw std::invalid_argument("sharpflat: dim must be >= 1");
  }

  std::string name() const override { return "sharpflat"; }
  int dim() const override { return dim_; }
  std::array<double, 2> domain_bounds() const override { return {-5.0, 5.0}; }
  double sharpness_coefficient() const { return s_; }

  // Piecewise-constant diagonal Hessian: 2 on the flat branch, 2s on the sharp one.
  Vec hessian_vec(const Vec& theta, const Vec& v) const override {
    check_dim(theta);
    check_same_dim(theta, v, "hessian_vec");
    Vec r(v.size());
    for (std::size_t d = 0; d < v.size(); ++d)
      r[d] = (flat_branch(theta[d]) ? 2.0 : 2.0 * s_) * v[d];
    return r;
  }

  // Coordinates of the kink points where the two branches meet.
  std::array<double, 2> kink_points() const {
    const double rs = std::sqrt(s_);
    return {rs / (rs + 1.0), rs / (rs - 1.0)};
  }

 private:
  bool flat_branch(double x) const { return x * x <= s_ * (x - 1.0) * (x - 1.0); }

  double value_impl(const Vec& t) const override {
    double v = 0.0;
    for (double x : t) v += std::min(x * x, s_ * (x - 1.0) * (x - 1.0));
    return v;
  }

  Vec gradient_impl(const Vec& t) const override {
    Vec g(t.size());
    for (std::size_t d = 0; d < t.size(); ++d)
      g[d] = flat_branch(t[d]) ? 2.0 * t[d] : 2.0 * s_ * (t[d] - 1.0);
    return g;
  }

  double s_;
  int dim_;
};

// L(theta) = theta' H theta / 2 with H diagonal or dense symmetric PSD.
class QuadraticLoss final : public LossSurface {
 public:
  explicit QuadraticLoss(Vec diagonal) : diag_(std::move(diagonal)) {
    if (diag_.empty()) throw std::invalid_argument("quadratic: empty diagonal");
  }

  QuadraticLoss(int n, std::vector<double> dense_row_major) : dense_(std::move(dense_row_major)), n_(n) {
    if (static_cast<int>(dense_.size()) != n * n)
      throw std::invalid_argument("quadratic: dense H must be n*n");
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (dense_[i * n + j] != dense_[j * n + i])
          throw std::invalid_argument("quadratic: H must be symmetric");
  }

  std::string name() const override { return "quadratic"; }
  int dim() const override { return diag_.empty() ? n_ : static_cast<int>(diag_.size()); }
  std::array<double, 2> domain_bounds() const override { return {-5.0, 5.0}; }

  Vec hessian_vec(const Vec& theta, const Vec& v) const override {
    check_dim(theta);
    check_same_dim(theta, v, "hessian_vec");
    return apply_h(v);
  }

 private:
  Vec apply_h(const Vec& x) const {
    Vec r(x.size(), 0.0);
    if (!diag_.empty()) {
      for (std::size_t i = 0; i < x.size(); ++i) r[i] = diag_[i] * x[i];
    } else {
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) r[i] += dense_[i * n_ + j] * x[j];
    }
    return r;
  }

  double value_impl(const Vec& t) const override {
    const Vec ht = apply_h(t);
    double v = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) v += t[i] * ht[i];
    return 0.5 * v;
  }

  Vec gradient_impl(const Vec& t) const override { return apply_h(t); }

  Vec diag_;
  std::vector<double> dense_;
  int n_ = 0;
};

// Central-difference check of the analytic gradient. Step per coordinate is
// 1e-5 * max(1, |theta_d|); relative error uses denominator max(1, |analytic_d|).
inline GradReport check_grad(const LossSurface& surface, const Vec& theta) {
  const Vec analytic = surface.gradient(theta);
  GradReport report;
  Vec probe(theta);
  for (std::size_t d = 0; d < theta.size(); ++d) {
    const double h = 1e-5 * std::max(1.0, std::abs(theta[d]));
    probe[d] = theta[d] + h;
    const double fp = surface.value(probe);
    probe[d] = theta[d] - h;
    const double fm = surface.value(probe);
    probe[d] = theta[d];
    const double fd = (fp - fm) / (2.0 * h);
    const double rel = std::abs(analytic[d] - fd) / std::max(1.0, std::abs(analytic[d]));
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = static_cast<int>(d);
    }
  }
  return report;
}

}  // namespace cmlab
