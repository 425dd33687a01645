#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cmlab/eig.hpp"
#include "cmlab/matrix.hpp"
#include "cmlab/parallel.hpp"

namespace cmlab {

// Scalar-collapsed linear system for the simplified critical-momenta update on
// a quadratic with curvature h. State V_t = [theta_t, theta_{t-1}, m_{t-1},
// ..., m_{t-C}] and
//   m_t       = beta * m_{t-1} + h * theta_t
//   theta_{t+1} = (1 - alpha h) theta_t - alpha (beta + 1/C) m_{t-1}
//                 - (alpha / C)(m_{t-2} + ... + m_{t-C}).
struct CompanionMatrix {
  Matrix a;
  double alpha = 0.0;
  double beta = 0.0;
  int capacity = 0;
  double h = 0.0;
};

inline CompanionMatrix build_companion(double alpha, double beta, int capacity, double h) {
  if (alpha < 0.0) throw std::invalid_argument("build_companion: alpha must be >= 0");
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("build_companion: beta in [0,1)");
  if (capacity < 1) throw std::invalid_argument("build_companion: capacity must be >= 1");
  if (!(h > 0.0)) throw std::invalid_argument("build_companion: h must be > 0");
  const int n = capacity + 2;
  CompanionMatrix cm{Matrix(n), alpha, beta, capacity, h};
  Matrix& a = cm.a;
  a(0, 0) = 1.0 - alpha * h;
  a(0, 2) = -alpha * (beta + 1.0 / capacity);
  for (int j = 3; j < n; ++j) a(0, j) = -alpha / capacity;
  a(1, 0) = 1.0;
  a(2, 0) = h;
  a(2, 2) = beta;
  for (int j = 3; j < n; ++j) a(j, j - 1) = 1.0;
  return cm;
}

// Classical momentum baseline: theta_{t+1} = theta_t - alpha h theta_t
// + beta (theta_t - theta_{t-1}); state [theta_t, theta_{t-1}].
inline Matrix build_heavy_ball(double alpha, double beta, double h) {
  Matrix a(2);
  a(0, 0) = 1.0 - alpha * h + beta;
  a(0, 1) = -beta;
  a(1, 0) = 1.0;
  return a;
}

struct RateResult {
  double rho = 0.0;
  double argmax_h = 0.0;
  double alpha_star = 0.0;
  double beta_star = 0.0;
};

enum class MomentumSystem { CriticalMomenta, HeavyBall };
enum class TuneMode { TuneBoth, FixedBeta09 };

inline std::vector<double> log_grid(double lo, double hi, int n) {
  if (n < 1) throw std::invalid_argument("log_grid: need at least one point");
  std::vector<double> g(static_cast<std::size_t>(n));
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i)
    g[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) / (n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

inline std::vector<double> lin_grid(double lo, double hi, int n) {
  if (n < 1) throw std::invalid_argument("lin_grid: need at least one point");
  std::vector<double> g(static_cast<std::size_t>(n));
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  g.front() = lo;
  g.back() = hi;
  return g;
}

// rho(alpha, beta) = max over a log grid of h in [mu, L] (endpoints included)
// of the spectral radius of the companion system.
inline RateResult worst_case_rate(double alpha, double beta, int capacity, double mu, double L,
                                  int h_grid_size,
                                  MomentumSystem system = MomentumSystem::CriticalMomenta) {
  if (!(mu > 0.0 && mu <= L)) throw std::invalid_argument("worst_case_rate: need 0 < mu <= L");
  RateResult r{-1.0, mu, alpha, beta};
  for (double h : log_grid(mu, L, mu == L ? 1 : h_grid_size)) {
    const double rho = (system == MomentumSystem::CriticalMomenta)
                           ? spectral_radius(build_companion(alpha, beta, capacity, h).a)
                           : spectral_radius(build_heavy_ball(alpha, beta, h));
    if (rho > r.rho) {
      r.rho = rho;
      r.argmax_h = h;
    }
  }
  return r;
}

struct SweepGrids {
  int alpha_points = 72;
  double alpha_min = 1e-5;
  double alpha_max = 2.0;
  int beta_points = 34;
  double beta_min = 0.0;
  double beta_max = 0.99;
  int h_points = 200;
  // Rounds beyond the first re-grid a shrinking window around the incumbent
  // minimizer; one round reproduces the plain grid minimum.
  int refine_rounds = 1;
};

// rho* = min over the (alpha, beta) grid of worst_case_rate with mu = 1,
// L = kappa. Grid cells evaluate concurrently; the reduction scans cells in
// ascending (alpha, beta) order so ties resolve toward the smaller values.
inline RateResult optimal_rate(int capacity, double kappa, TuneMode mode,
                               const SweepGrids& grids = {},
                               MomentumSystem system = MomentumSystem::CriticalMomenta) {
  if (!(kappa >= 1.0)) throw std::invalid_argument("optimal_rate: kappa must be >= 1");
  if (grids.alpha_points < 2 || (mode == TuneMode::TuneBoth && grids.beta_points < 2))
    throw std::invalid_argument("optimal_rate: grids need at least two points per tuned axis");
  double a_lo = grids.alpha_min, a_hi = grids.alpha_max;
  double b_lo = grids.beta_min, b_hi = grids.beta_max;
  RateResult overall{std::numeric_limits<double>::infinity(), 0.0, 0.0, 0.0};
  for (int round = 0; round < std::max(grids.refine_rounds, 1); ++round) {
    const std::vector<double> alphas = round == 0 ? log_grid(a_lo, a_hi, grids.alpha_points)
                                                  : lin_grid(a_lo, a_hi, grids.alpha_points);
    const std::vector<double> betas = (mode == TuneMode::FixedBeta09)
                                          ? std::vector<double>{0.9}
                                          : lin_grid(b_lo, b_hi, grids.beta_points);
    const std::size_t cells = alphas.size() * betas.size();
    std::vector<RateResult> results(cells);
    parallel_for(cells, [&](std::size_t i) {
      const std::size_t ai = i / betas.size();
      const std::size_t bi = i % betas.size();
      results[i] =
          worst_case_rate(alphas[ai], betas[bi], capacity, 1.0, kappa, grids.h_points, system);
    });
    std::size_t win = 0;
    RateResult best = results[0];
    for (std::size_t i = 1; i < cells; ++i)
      if (results[i].rho < best.rho) {
        best = results[i];
        win = i;
      }
    if (best.rho < overall.rho) overall = best;
    // Re-center the next window on the argmin, clamped to the global bounds
    // only. An interior argmin shrinks the window to two steps per side; an
    // argmin at the window edge keeps the current width so the window can
    // keep sliding along a diagonal valley instead of wedging against it.
    const std::size_t ai = win / betas.size();
    const std::size_t bi = win % betas.size();
    const auto recenter = [](double center, double lo, double hi, double step, bool interior,
                             double global_lo, double global_hi, double& out_lo,
                             double& out_hi) {
      const double half = interior ? 2.0 * step : (hi - lo) / 2.0;
      out_lo = std::max(global_lo, center - half);
      out_hi = std::min(global_hi, center + half);
    };
    const bool a_interior = ai > 1 && ai + 2 < alphas.size();
    if (round == 0) {
      const double ratio = std::pow(a_hi / a_lo, 1.0 / (grids.alpha_points - 1));
      const double half_ratio = a_interior ? ratio * ratio : std::sqrt(a_hi / a_lo);
      a_lo = std::max(grids.alpha_min, alphas[ai] / half_ratio);
      a_hi = std::min(grids.alpha_max, alphas[ai] * half_ratio);
    } else {
      recenter(alphas[ai], a_lo, a_hi, (a_hi - a_lo) / (grids.alpha_points - 1), a_interior,
               grids.alpha_min, grids.alpha_max, a_lo, a_hi);
    }
    if (mode == TuneMode::TuneBoth) {
      const bool b_interior = bi > 1 && bi + 2 < betas.size();
      recenter(betas[bi], b_lo, b_hi, (b_hi - b_lo) / (grids.beta_points - 1), b_interior,
               grids.beta_min, grids.beta_max, b_lo, b_hi);
    }
  }
  return overall;
}

}  // namespace cmlab
