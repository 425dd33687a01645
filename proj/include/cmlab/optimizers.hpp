#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <utility>

#include "cmlab/buffer.hpp"
#include "cmlab/losses.hpp"
#include "cmlab/vec.hpp"

namespace cmlab {

enum class Algorithm { Sgd, SgdCg, SgdCm, Adam, AdamCg, AdamCm, SimpleCm };

inline bool uses_priority_buffer(Algorithm a) {
  return a == Algorithm::SgdCg || a == Algorithm::SgdCm || a == Algorithm::AdamCg ||
         a == Algorithm::AdamCm;
}

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::Adam;
  double alpha = 0.1;     // step size
  double beta1 = 0.9;     // first-moment decay
  double beta2 = 0.99;    // second-moment decay
  double epsilon = 1e-8;  // inside the square root
  int capacity = 5;       // buffer capacity C
  double decay = 0.7;     // priority decay lambda
  bool sam_enabled = false;
  double sam_rho = 0.05;
  double beta = 0.9;      // momentum for the simplified update
};

struct OptimizerState {
  long long t = 0;
  Vec m;                  // first moment
  Vec v;                  // second moment, per coordinate
  CriticalBuffer buffer;  // priority buffer for the CG/CM variants
  std::deque<Vec> recent; // last momenta for the simplified update (front = newest)

  OptimizerState(int dim, const OptimizerConfig& cfg)
      : m(static_cast<std::size_t>(dim), 0.0),
        v(static_cast<std::size_t>(dim), 0.0),
        buffer(cfg.capacity, cfg.decay) {}
};

namespace detail {

inline void check_step_inputs(const OptimizerState& st, const Vec& theta, const Vec& g) {
  check_same_dim(theta, g, "step");
  check_same_dim(theta, st.m, "step state");
  if (!all_finite(g)) throw std::invalid_argument("step: non-finite gradient");
}

}  // namespace detail

// Plain Adam with the epsilon term inside the square root.
inline Vec adam_step(OptimizerState& st, const OptimizerConfig& cfg, const Vec& theta,
                     const Vec& g) {
  detail::check_step_inputs(st, theta, g);
  st.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  Vec out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    out[i] = theta[i] - cfg.alpha * mhat / std::sqrt(vhat + cfg.epsilon);
  }
  return out;
}

// Adam with a buffer of critical momenta. The aggregate a = m + mean(buffer)
// drives both the second moment and the update; the fresh momentum (not the
// aggregate) is what gets stored, keyed by ||g||. Insertion precedes decay.
inline Vec adam_cm_step(OptimizerState& st, const OptimizerConfig& cfg, const Vec& theta,
                        const Vec& g) {
  detail::check_step_inputs(st, theta, g);
  st.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  const Vec mean = st.buffer.mean(static_cast<int>(theta.size()));
  Vec out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g[i];
    const double a = st.m[i] + mean[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * a * a;
    const double ahat = a / c1;
    const double vhat = st.v[i] / c2;
    out[i] = theta[i] - cfg.alpha * ahat / std::sqrt(vhat + cfg.epsilon);
  }
  st.buffer.maybe_insert(norm2(g), st.m);
  st.buffer.decay_priorities();
  return out;
}

// Adam with a buffer of critical gradients: the aggregate a = g + mean(buffer)
// replaces g in both moment updates, and the raw gradient is stored.
inline Vec adam_cg_step(OptimizerState& st, const OptimizerConfig& cfg, const Vec& theta,
                        const Vec& g) {
  detail::check_step_inputs(st, theta, g);
  st.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  const Vec mean = st.buffer.mean(static_cast<int>(theta.size()));
  Vec out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double a = g[i] + mean[i];
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * a;
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * a * a;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    out[i] = theta[i] - cfg.alpha * mhat / std::sqrt(vhat + cfg.epsilon);
  }
  st.buffer.maybe_insert(norm2(g), g);
  st.buffer.decay_priorities();
  return out;
}

// SGD and its memory-augmented variants.
inline Vec sgd_family_step(OptimizerState& st, const OptimizerConfig& cfg, const Vec& theta,
                           const Vec& g) {
  detail::check_step_inputs(st, theta, g);
  st.t += 1;
  Vec out(theta.size());
  switch (cfg.algorithm) {
    case Algorithm::Sgd:
      for (std::size_t i = 0; i < theta.size(); ++i) out[i] = theta[i] - cfg.alpha * g[i];
      return out;
    case Algorithm::SgdCg: {
      const Vec mean = st.buffer.mean(static_cast<int>(theta.size()));
      for (std::size_t i = 0; i < theta.size(); ++i)
        out[i] = theta[i] - cfg.alpha * (g[i] + mean[i]);
      st.buffer.maybe_insert(norm2(g), g);
      st.buffer.decay_priorities();
      return out;
    }
    case Algorithm::SgdCm: {
      const Vec mean = st.buffer.mean(static_cast<int>(theta.size()));
      for (std::size_t i = 0; i < theta.size(); ++i) {
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g[i];
        out[i] = theta[i] - cfg.alpha * (st.m[i] + mean[i]);
      }
      st.buffer.maybe_insert(norm2(g), st.m);
      st.buffer.decay_priorities();
      return out;
    }
    default:
      throw std::invalid_argument("sgd_family_step: not an SGD-family algorithm");
  }
}

// Simplified variant used by the convergence analysis: heavy-ball style
// momentum m <- beta*m + g (no 1-beta factor) and a plain FIFO of the last C
// momenta, zero-padded during warm-up, whose sum is divided by C
// unconditionally.
inline Vec simple_cm_step(OptimizerState& st, const OptimizerConfig& cfg, const Vec& theta,
                          const Vec& g) {
  detail::check_step_inputs(st, theta, g);
  st.t += 1;
  Vec out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    st.m[i] = cfg.beta * st.m[i] + g[i];
    double fifo_sum = 0.0;
    for (const Vec& prev : st.recent) fifo_sum += prev[i];
    out[i] = theta[i] - cfg.alpha * (st.m[i] + fifo_sum / cfg.capacity);
  }
  st.recent.push_front(st.m);
  if (static_cast<int>(st.recent.size()) > cfg.capacity) st.recent.pop_back();
  return out;
}

// Dispatch on cfg.algorithm.
inline Vec step(OptimizerState& st, const OptimizerConfig& cfg, const Vec& theta, const Vec& g) {
  switch (cfg.algorithm) {
    case Algorithm::Adam:
      return adam_step(st, cfg, theta, g);
    case Algorithm::AdamCg:
      return adam_cg_step(st, cfg, theta, g);
    case Algorithm::AdamCm:
      return adam_cm_step(st, cfg, theta, g);
    case Algorithm::SimpleCm:
      return simple_cm_step(st, cfg, theta, g);
    default:
      return sgd_family_step(st, cfg, theta, g);
  }
}

// The vector the next step will aggregate with the buffer mean, computed
// without mutating state. Used for the cancellation diagnostic.
inline Vec aggregation_preview(const OptimizerState& st, const OptimizerConfig& cfg,
                               const Vec& g) {
  switch (cfg.algorithm) {
    case Algorithm::AdamCm:
    case Algorithm::SgdCm: {
      Vec m(st.m);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      return m;
    }
    case Algorithm::SimpleCm: {
      Vec m(st.m);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = cfg.beta * m[i] + g[i];
      return m;
    }
    default:
      return g;
  }
}

// Gradient the inner step consumes under SAM: the gradient at the ascent
// point theta + rho * g / ||g||, or g itself when g = 0.
template <typename GradFn>
  requires std::invocable<GradFn&, const Vec&>
Vec sam_gradient(double sam_rho, GradFn&& grad_at, const Vec& theta) {
  Vec g = grad_at(theta);
  const double gn = norm2(g);
  if (gn > 0.0) {
    Vec perturbed(theta);
    const double scale = sam_rho / gn;
    for (std::size_t i = 0; i < theta.size(); ++i) perturbed[i] += scale * g[i];
    g = grad_at(perturbed);
  }
  return g;
}

// Sharpness-aware outer step: feed the perturbed-point gradient, at the
// unperturbed theta, to whichever inner algorithm the config selects.
template <typename GradFn>
  requires std::invocable<GradFn&, const Vec&>
Vec sam_outer_step(OptimizerState& st, const OptimizerConfig& cfg, GradFn&& grad_at,
                   const Vec& theta) {
  const Vec g = sam_gradient(cfg.sam_rho, grad_at, theta);
  if (!all_finite(g)) throw std::invalid_argument("sam_outer_step: non-finite perturbed gradient");
  return step(st, cfg, theta, g);
}

inline Vec sam_outer_step(OptimizerState& st, const OptimizerConfig& cfg,
                          const LossSurface& surface, const Vec& theta) {
  return sam_outer_step(st, cfg, [&surface](const Vec& p) { return surface.gradient(p); }, theta);
}

enum class ScheduleMode { Constant, HalfDecay };

// Constant keeps the base step size; HalfDecay divides it by 10 once half of
// the run has elapsed.
inline double lr_schedule_at(double base_alpha, long long t, long long total, ScheduleMode mode) {
  if (mode == ScheduleMode::Constant) return base_alpha;
  return (2 * t < total) ? base_alpha : base_alpha / 10.0;
}

inline std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Sgd: return "sgd";
    case Algorithm::SgdCg: return "sgd_cg";
    case Algorithm::SgdCm: return "sgd_cm";
    case Algorithm::Adam: return "adam";
    case Algorithm::AdamCg: return "adam_cg";
    case Algorithm::AdamCm: return "adam_cm";
    case Algorithm::SimpleCm: return "simple_cm";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& token) {
  if (token == "sgd") return Algorithm::Sgd;
  if (token == "sgd_cg") return Algorithm::SgdCg;
  if (token == "sgd_cm") return Algorithm::SgdCm;
  if (token == "adam") return Algorithm::Adam;
  if (token == "adam_cg") return Algorithm::AdamCg;
  if (token == "adam_cm") return Algorithm::AdamCm;
  if (token == "simple_cm") return Algorithm::SimpleCm;
  throw std::invalid_argument("unknown optimizer \"" + token + "\"");
}

inline std::string optimizer_label(const OptimizerConfig& cfg) {
  std::string s = algorithm_name(cfg.algorithm);
  if (cfg.sam_enabled) s += "_sam";
  return s;
}

}  // namespace cmlab
