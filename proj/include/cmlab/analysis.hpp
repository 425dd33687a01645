#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "cmlab/buffer.hpp"
#include "cmlab/losses.hpp"
#include "cmlab/mlp.hpp"
#include "cmlab/rng.hpp"
#include "cmlab/vec.hpp"

namespace cmlab {

struct SharpnessReport {
  double h_max = 0.0;
  int iterations_used = 0;
  bool converged = false;
};

// Largest-magnitude Hessian eigenvalue by power iteration on the
// Hessian-vector product, reported with the sign of its Rayleigh quotient.
inline SharpnessReport max_hessian_eig(const LossSurface& surface, const Vec& theta,
                                       double tol = 1e-6, int max_iters = 1000,
                                       std::uint64_t seed = 0) {
  SplitMix64 rng(seed);
  Vec v(theta.size());
  for (double& x : v) x = rng.normal();
  double nv = norm2(v);
  if (nv == 0.0) {
    v.assign(theta.size(), 0.0);
    v[0] = nv = 1.0;
  }
  for (double& x : v) x /= nv;

  SharpnessReport report;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iters; ++it) {
    const Vec w = surface.hessian_vec(theta, v);
    const double rayleigh = dot(v, w);
    report.h_max = rayleigh;
    report.iterations_used = it;
    if (std::abs(rayleigh - prev) < tol) {
      report.converged = true;
      return report;
    }
    prev = rayleigh;
    const double nw = norm2(w);
    if (nw == 0.0) {  // v is in the null space; dominant eigenvalue is 0
      report.h_max = 0.0;
      report.converged = true;
      return report;
    }
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / nw;
  }
  return report;
}

struct MSharpnessConfig {
  double radius = 0.05;
  int ascent_steps = 20;
  int n_batches = 1;
  int batch_size = 0;  // informational; partitioning is driven by n_batches
};

namespace detail {

// Worst loss increase within the radius-r ball around theta, found by
// projected ascent with steps of length r/10. The ascent starts from the
// boundary point along the gradient; at a critical point (zero gradient) it
// starts from the best of eight seeded random boundary points instead.
inline double ball_ascent(const LossSurface& surface, const Vec& theta, double r, int steps,
                          SplitMix64& rng) {
  const double base = surface.value(theta);
  const Vec g = surface.gradient(theta);
  const double gn = norm2(g);
  Vec eps(theta.size(), 0.0);
  if (gn > 0.0) {
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = r * g[i] / gn;
  } else {
    double best_val = -std::numeric_limits<double>::infinity();
    Vec cand(theta.size());
    for (int trial = 0; trial < 8; ++trial) {
      for (double& x : cand) x = rng.normal();
      const double cn = norm2(cand);
      if (cn == 0.0) continue;
      Vec probe(theta);
      for (std::size_t i = 0; i < probe.size(); ++i) probe[i] += r * cand[i] / cn;
      const double val = surface.value(probe);
      if (val > best_val) {
        best_val = val;
        for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = r * cand[i] / cn;
      }
    }
  }
  Vec probe(theta.size());
  for (int k = 0; k < steps; ++k) {
    for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = theta[i] + eps[i];
    const Vec ge = surface.gradient(probe);
    const double gen = norm2(ge);
    if (gen > 0.0)
      for (std::size_t i = 0; i < eps.size(); ++i) eps[i] += (r / 10.0) * ge[i] / gen;
    const double en = norm2(eps);
    if (en > r)
      for (double& x : eps) x *= r / en;
  }
  for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = theta[i] + eps[i];
  return surface.value(probe) - base;
}

}  // namespace detail

// Batch-averaged worst-case loss increase within an l2 ball of radius cfg.radius.
// Deterministic surfaces use a single batch (the whole objective); MLP losses
// are split into seeded disjoint batches.
inline double m_sharpness(const LossSurface& surface, const Vec& theta,
                          const MSharpnessConfig& cfg, std::uint64_t seed) {
  if (!(cfg.radius > 0.0)) throw std::invalid_argument("m_sharpness: radius must be > 0");
  SplitMix64 rng(seed);
  if (cfg.n_batches <= 1)
    return detail::ball_ascent(surface, theta, cfg.radius, cfg.ascent_steps, rng);
  const auto* mlp = dynamic_cast<const MlpLoss*>(&surface);
  if (mlp == nullptr)
    throw std::invalid_argument("m_sharpness: batching requires an MLP loss (n_batches = 1 otherwise)");
  double acc = 0.0;
  const auto parts = mlp->batches(cfg.n_batches, seed);
  for (const auto& part : parts)
    acc += detail::ball_ascent(*part, theta, cfg.radius, cfg.ascent_steps, rng);
  return acc / static_cast<double>(parts.size());
}

// Total l2 length of a parameter trajectory.
inline double path_distance(std::span<const Vec> trajectory) {
  if (trajectory.empty()) throw std::invalid_argument("path_distance: empty trajectory");
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < trajectory.size(); ++k)
    total += norm2(trajectory[k + 1] - trajectory[k]);
  return total;
}

// ||g + mean|| / (||g|| + ||mean||): near 0 when the buffer mean cancels the
// fresh vector, near 1 when they align.
inline double cancellation_index(const CriticalBuffer& buf, const Vec& g) {
  if (buf.occupancy() < 1) throw std::invalid_argument("cancellation_index: empty buffer");
  const Vec mean = buf.mean(static_cast<int>(g.size()));
  const double denom = norm2(g) + norm2(mean);
  if (denom == 0.0) throw std::invalid_argument("cancellation_index: zero denominator");
  return norm2(g + mean) / denom;
}

}  // namespace cmlab
