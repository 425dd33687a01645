#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmlab/analysis.hpp"
#include "cmlab/convergence.hpp"
#include "cmlab/csv.hpp"
#include "cmlab/losses.hpp"
#include "cmlab/mlp.hpp"
#include "cmlab/optimizers.hpp"
#include "cmlab/parallel.hpp"
#include "cmlab/rng.hpp"
#include "cmlab/serde.hpp"

namespace cmlab {

// Bad configuration or command line; the CLI maps this to exit code 2.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Surface construction

struct SurfaceSpec {
  std::string kind = "ackley";
  double s = 25.0;                 // sharpflat sharpness coefficient
  int dim = 10;                    // sharpflat dimension
  Vec quad_diag = {1.0};           // quadratic diagonal
  std::uint64_t data_seed = 0;     // mlp
  int n_samples = 200;             // mlp
  int hidden = 16;                 // mlp
};

inline std::unique_ptr<LossSurface> make_surface(const SurfaceSpec& spec) {
  if (spec.kind == "ackley") return std::make_unique<AckleyLoss>();
  if (spec.kind == "gp" || spec.kind == "goldstein_price")
    return std::make_unique<GoldsteinPriceLoss>();
  if (spec.kind == "levy") return std::make_unique<Levy2DLoss>();
  if (spec.kind == "ackley_rosenbrock") return std::make_unique<AckleyRosenbrockLoss>();
  if (spec.kind == "sharpflat") {
    if (!(spec.s > 1.0)) throw UsageError("sharpflat requires s > 1");
    if (spec.dim < 1) throw UsageError("sharpflat requires dim >= 1");
    return std::make_unique<SharpFlatLoss>(spec.s, spec.dim);
  }
  if (spec.kind == "quadratic") {
    if (spec.quad_diag.empty()) throw UsageError("quadratic requires a non-empty diagonal");
    return std::make_unique<QuadraticLoss>(spec.quad_diag);
  }
  if (spec.kind == "mlp") {
    if (spec.n_samples < 2 || spec.hidden < 1) throw UsageError("mlp requires n_samples >= 2, hidden >= 1");
    return std::make_unique<MlpLoss>(spec.data_seed, spec.n_samples, spec.hidden);
  }
  throw UsageError("unknown surface \"" + spec.kind + "\"");
}

inline OptimizerConfig optimizer_from_token(const std::string& token) {
  OptimizerConfig cfg;
  try {
    cfg.algorithm = parse_algorithm(token);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Experiment configuration

enum class InitMode { Uniform, Fixed };

struct ExperimentConfig {
  std::string experiment = "trajectory";
  SurfaceSpec surface;
  std::vector<SurfaceSpec> table_surfaces;  // seed_table default: {gp, levy}
  std::vector<OptimizerConfig> optimizers;
  long long steps = 500;
  ScheduleMode schedule = ScheduleMode::HalfDecay;
  std::vector<std::uint64_t> seeds = {0};
  InitMode init_mode = InitMode::Uniform;
  Vec init_theta;
  std::string out_dir = ".";
  int sharpness_stride = 25;  // diagnostics: h_max cadence in steps
  // convergence sweep
  std::vector<int> capacities = {5};
  std::vector<double> kappas = {1.0, 10.0, 100.0, 1000.0};
  std::vector<std::string> modes = {"tune_both", "fixed_beta"};
  bool include_heavy_ball = true;
  SweepGrids grids;
};

inline ScheduleMode parse_schedule(const std::string& token) {
  if (token == "constant") return ScheduleMode::Constant;
  if (token == "half_decay") return ScheduleMode::HalfDecay;
  throw UsageError("unknown schedule \"" + token + "\"");
}

inline std::string schedule_name(ScheduleMode m) {
  return m == ScheduleMode::Constant ? "constant" : "half_decay";
}

inline TuneMode parse_tune_mode(const std::string& token) {
  if (token == "tune_both") return TuneMode::TuneBoth;
  if (token == "fixed_beta") return TuneMode::FixedBeta09;
  throw UsageError("unknown sweep mode \"" + token + "\"");
}

inline SurfaceSpec surface_spec_from_json(const nlohmann::json& j) {
  SurfaceSpec s;
  s.kind = j.value("kind", s.kind);
  s.s = j.value("s", s.s);
  s.dim = j.value("dim", s.dim);
  if (j.contains("diag")) s.quad_diag = j.at("diag").get<Vec>();
  if (j.contains("data_seed")) s.data_seed = j.at("data_seed").get<std::uint64_t>();
  s.n_samples = j.value("n_samples", s.n_samples);
  s.hidden = j.value("hidden", s.hidden);
  return s;
}

inline void apply_config_json(ExperimentConfig& cfg, const nlohmann::json& j) {
  try {
    cfg.experiment = j.value("experiment", cfg.experiment);
    if (j.contains("surface")) cfg.surface = surface_spec_from_json(j.at("surface"));
    if (j.contains("table_surfaces")) {
      cfg.table_surfaces.clear();
      for (const auto& js : j.at("table_surfaces"))
        cfg.table_surfaces.push_back(surface_spec_from_json(js));
    }
    if (j.contains("optimizers")) {
      cfg.optimizers.clear();
      for (const auto& jo : j.at("optimizers"))
        cfg.optimizers.push_back(optimizer_config_from_json(jo));
    } else if (j.contains("optimizer")) {
      cfg.optimizers = {optimizer_config_from_json(j.at("optimizer"))};
    }
    cfg.steps = j.value("steps", cfg.steps);
    if (j.contains("schedule")) cfg.schedule = parse_schedule(j.at("schedule").get<std::string>());
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("n_seeds")) {
      cfg.seeds.clear();
      for (std::uint64_t s = 0; s < j.at("n_seeds").get<std::uint64_t>(); ++s)
        cfg.seeds.push_back(s);
    }
    if (j.contains("init")) {
      const auto& ji = j.at("init");
      const std::string mode = ji.value("mode", "uniform");
      if (mode == "uniform") {
        cfg.init_mode = InitMode::Uniform;
      } else if (mode == "fixed") {
        cfg.init_mode = InitMode::Fixed;
        cfg.init_theta = ji.at("theta").get<Vec>();
      } else {
        throw UsageError("unknown init mode \"" + mode + "\"");
      }
    }
    cfg.out_dir = j.value("out", cfg.out_dir);
    cfg.sharpness_stride = j.value("sharpness_stride", cfg.sharpness_stride);
    if (j.contains("capacities")) cfg.capacities = j.at("capacities").get<std::vector<int>>();
    if (j.contains("kappas")) cfg.kappas = j.at("kappas").get<std::vector<double>>();
    if (j.contains("modes")) cfg.modes = j.at("modes").get<std::vector<std::string>>();
    cfg.include_heavy_ball = j.value("heavy_ball", cfg.include_heavy_ball);
    if (j.contains("grids")) {
      const auto& jg = j.at("grids");
      cfg.grids.alpha_points = jg.value("alpha_points", cfg.grids.alpha_points);
      cfg.grids.alpha_min = jg.value("alpha_min", cfg.grids.alpha_min);
      cfg.grids.alpha_max = jg.value("alpha_max", cfg.grids.alpha_max);
      cfg.grids.beta_points = jg.value("beta_points", cfg.grids.beta_points);
      cfg.grids.beta_min = jg.value("beta_min", cfg.grids.beta_min);
      cfg.grids.beta_max = jg.value("beta_max", cfg.grids.beta_max);
      cfg.grids.h_points = jg.value("h_points", cfg.grids.h_points);
      cfg.grids.refine_rounds = jg.value("refine_rounds", cfg.grids.refine_rounds);
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (cfg.seeds.empty()) throw UsageError("seeds must be non-empty");
  if (cfg.steps < 1) throw UsageError("steps must be >= 1");
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config parse error in " + path + ": " + e.what());
  }
  ExperimentConfig cfg;
  apply_config_json(cfg, j);
  return cfg;
}

// ---------------------------------------------------------------------------
// Single optimization run

struct TrajectoryRecord {
  long long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double theta_norm = 0.0;
  double buf_variance = 0.0;
  double buf_cosine = 1.0;
  int buf_occupancy = 0;
  double cancel_index = 1.0;
  double path_dist = 0.0;
  double h_max = std::numeric_limits<double>::quiet_NaN();  // set at stride steps only
};

struct RunResult {
  std::vector<TrajectoryRecord> records;
  Vec final_theta;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
  SharpnessReport sharpness;
};

inline Vec sample_uniform_init(const LossSurface& surface, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const auto [lo, hi] = surface.domain_bounds();
  Vec theta(static_cast<std::size_t>(surface.dim()));
  for (double& x : theta) x = rng.uniform(lo, hi);
  return theta;
}

struct RunOptions {
  bool keep_records = true;
  bool final_sharpness = true;
  int sharpness_stride = 0;  // > 0: compute h_max at the pre-step point every stride steps
};

// One seeded optimization run. A non-finite loss, gradient, or iterate marks
// the run diverged; the run is kept with whatever was recorded up to there.
inline RunResult run_single(const LossSurface& surface, const OptimizerConfig& cfg,
                            std::uint64_t seed, long long steps, ScheduleMode schedule,
                            InitMode init_mode, const Vec& init_theta,
                            const RunOptions& opts = {}) {
  RunResult res;
  Vec theta;
  if (init_mode == InitMode::Fixed) {
    if (static_cast<int>(init_theta.size()) != surface.dim())
      throw UsageError("fixed init has dimension " + std::to_string(init_theta.size()) +
                       " but surface " + surface.name() + " needs " +
                       std::to_string(surface.dim()));
    theta = init_theta;
  } else {
    theta = sample_uniform_init(surface, seed);
  }
  OptimizerState state(surface.dim(), cfg);
  if (opts.keep_records) res.records.reserve(static_cast<std::size_t>(steps));
  double path = 0.0;
  const auto grad_at = [&surface](const Vec& p) { return surface.gradient(p); };

  for (long long t = 0; t < steps; ++t) {
    OptimizerConfig step_cfg = cfg;
    step_cfg.alpha = lr_schedule_at(cfg.alpha, t, steps, schedule);
    double loss;
    Vec g;
    try {
      loss = surface.value(theta);
      g = cfg.sam_enabled ? sam_gradient(cfg.sam_rho, grad_at, theta) : grad_at(theta);
    } catch (const std::domain_error&) {
      res.diverged = true;
      break;
    }
    if (!all_finite(g)) {
      res.diverged = true;
      break;
    }
    double cancel = 1.0;
    if (uses_priority_buffer(cfg.algorithm) && state.buffer.occupancy() >= 1) {
      const Vec x = aggregation_preview(state, step_cfg, g);
      if (norm2(x) + norm2(state.buffer.mean(static_cast<int>(x.size()))) > 0.0)
        cancel = cancellation_index(state.buffer, x);
    }
    double h_max = std::numeric_limits<double>::quiet_NaN();
    if (opts.sharpness_stride > 0 && t % opts.sharpness_stride == 0)
      h_max = max_hessian_eig(surface, theta, 1e-6, 1000, seed).h_max;
    Vec next = step(state, step_cfg, theta, g);
    if (!all_finite(next)) {
      res.diverged = true;
      break;
    }
    path += norm2(next - theta);
    theta = std::move(next);
    if (opts.keep_records) {
      const BufferStats bs = state.buffer.stats();
      res.records.push_back({t, loss, step_cfg.alpha, norm2(theta), bs.variance,
                             bs.cosine_agreement, bs.occupancy, cancel, path, h_max});
    }
  }
  res.final_theta = theta;
  if (!res.diverged) {
    try {
      res.final_loss = surface.value(theta);
    } catch (const std::domain_error&) {
      res.diverged = true;
    }
  }
  if (!res.diverged && opts.final_sharpness)
    res.sharpness = max_hessian_eig(surface, theta, 1e-6, 1000, seed);
  return res;
}

// ---------------------------------------------------------------------------
// Experiments. Runs across (optimizer, seed) cells execute concurrently into
// per-cell slots; files are written from the slots in a fixed order, so output
// bytes never depend on the worker count.

inline void require_single_optimizer(const ExperimentConfig& cfg) {
  if (cfg.optimizers.empty()) throw UsageError("no optimizer configured");
}

inline std::filesystem::path out_path(const ExperimentConfig& cfg, const std::string& file) {
  return std::filesystem::path(cfg.out_dir) / file;
}

// trajectory.csv (single optimizer) or trajectory_<label>.csv per optimizer.
inline void run_trajectory(const ExperimentConfig& cfg) {
  require_single_optimizer(cfg);
  const auto surface = make_surface(cfg.surface);
  for (const OptimizerConfig& opt : cfg.optimizers) {
    std::vector<RunResult> slots(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), [&](std::size_t i) {
      slots[i] = run_single(*surface, opt, cfg.seeds[i], cfg.steps, cfg.schedule, cfg.init_mode,
                            cfg.init_theta);
    });
    const std::string file = cfg.optimizers.size() == 1
                                 ? "trajectory.csv"
                                 : "trajectory_" + optimizer_label(opt) + ".csv";
    CsvWriter csv(out_path(cfg, file));
    csv.row({"seed", "step", "loss", "lr", "buf_variance", "buf_cosine", "cancel_index",
             "path_dist"});
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
      for (const TrajectoryRecord& r : slots[i].records)
        csv.row({format_int(static_cast<long long>(cfg.seeds[i])), format_int(r.step),
                 format_double(r.loss), format_double(r.lr), format_double(r.buf_variance),
                 format_double(r.buf_cosine), format_double(r.cancel_index),
                 format_double(r.path_dist)});
    csv.close();
  }
}

struct EscapeSummary {
  std::string optimizer;
  int escaped = 0;
  int total = 0;
  double ratio = 0.0;
};

// escape.csv rows per (optimizer, seed); returns the per-optimizer ratios.
inline std::vector<EscapeSummary> run_escape_ratio(const ExperimentConfig& cfg) {
  require_single_optimizer(cfg);
  if (cfg.surface.kind != "sharpflat")
    throw UsageError("escape experiment requires the sharpflat surface, got \"" +
                     cfg.surface.kind + "\"");
  const auto surface = make_surface(cfg.surface);
  const std::size_t n_opt = cfg.optimizers.size(), n_seed = cfg.seeds.size();
  std::vector<RunResult> slots(n_opt * n_seed);
  parallel_for(n_opt * n_seed, [&](std::size_t i) {
    const std::size_t oi = i / n_seed, si = i % n_seed;
    RunOptions opts;
    opts.keep_records = false;
    opts.final_sharpness = false;
    slots[i] = run_single(*surface, cfg.optimizers[oi], cfg.seeds[si], cfg.steps, cfg.schedule,
                          cfg.init_mode, cfg.init_theta, opts);
  });
  CsvWriter csv(out_path(cfg, "escape.csv"));
  csv.row({"seed", "s", "dim", "optimizer", "escaped", "final_loss", "final_inf_norm"});
  std::vector<EscapeSummary> summaries;
  for (std::size_t oi = 0; oi < n_opt; ++oi) {
    EscapeSummary sum;
    sum.optimizer = optimizer_label(cfg.optimizers[oi]);
    sum.total = static_cast<int>(n_seed);
    for (std::size_t si = 0; si < n_seed; ++si) {
      const RunResult& r = slots[oi * n_seed + si];
      const double inf_norm = r.diverged ? std::numeric_limits<double>::quiet_NaN()
                                         : norm_inf(r.final_theta);
      const bool escaped = !r.diverged && inf_norm < 0.5;
      sum.escaped += escaped ? 1 : 0;
      csv.row({format_int(static_cast<long long>(cfg.seeds[si])), format_double(cfg.surface.s),
               format_int(cfg.surface.dim), sum.optimizer, escaped ? "1" : "0",
               format_double(r.final_loss), format_double(inf_norm)});
    }
    sum.ratio = static_cast<double>(sum.escaped) / static_cast<double>(sum.total);
    summaries.push_back(sum);
  }
  csv.close();
  return summaries;
}

struct TableSummary {
  std::string surface;
  std::string optimizer;
  double mean_loss = 0.0;
  double mean_h_max = 0.0;
  int excluded = 0;  // diverged runs, excluded from the means
};

// table.csv: per-seed rows plus one summary row per (surface, optimizer).
inline std::vector<TableSummary> run_seed_table(const ExperimentConfig& cfg) {
  require_single_optimizer(cfg);
  std::vector<SurfaceSpec> specs = cfg.table_surfaces;
  if (specs.empty()) {
    SurfaceSpec gp, levy;
    gp.kind = "gp";
    levy.kind = "levy";
    specs = {gp, levy};
  }
  const std::size_t n_surf = specs.size(), n_opt = cfg.optimizers.size(),
                    n_seed = cfg.seeds.size();
  std::vector<std::unique_ptr<LossSurface>> surfaces;
  for (const auto& sp : specs) surfaces.push_back(make_surface(sp));
  std::vector<RunResult> slots(n_surf * n_opt * n_seed);
  parallel_for(slots.size(), [&](std::size_t i) {
    const std::size_t fi = i / (n_opt * n_seed);
    const std::size_t oi = (i / n_seed) % n_opt;
    const std::size_t si = i % n_seed;
    RunOptions opts;
    opts.keep_records = false;
    slots[i] = run_single(*surfaces[fi], cfg.optimizers[oi], cfg.seeds[si], cfg.steps,
                          cfg.schedule, cfg.init_mode, cfg.init_theta, opts);
  });
  CsvWriter csv(out_path(cfg, "table.csv"));
  csv.row({"surface", "optimizer", "seed", "final_loss", "h_max", "diverged"});
  std::vector<TableSummary> summaries;
  for (std::size_t fi = 0; fi < n_surf; ++fi)
    for (std::size_t oi = 0; oi < n_opt; ++oi) {
      TableSummary sum;
      sum.surface = surfaces[fi]->name();
      sum.optimizer = optimizer_label(cfg.optimizers[oi]);
      double loss_acc = 0.0, h_acc = 0.0;
      int kept = 0;
      for (std::size_t si = 0; si < n_seed; ++si) {
        const RunResult& r = slots[(fi * n_opt + oi) * n_seed + si];
        csv.row({sum.surface, sum.optimizer, format_int(static_cast<long long>(cfg.seeds[si])),
                 format_double(r.final_loss), format_double(r.sharpness.h_max),
                 r.diverged ? "1" : "0"});
        if (r.diverged) {
          ++sum.excluded;
        } else {
          loss_acc += r.final_loss;
          h_acc += r.sharpness.h_max;
          ++kept;
        }
      }
      sum.mean_loss = kept > 0 ? loss_acc / kept : std::numeric_limits<double>::quiet_NaN();
      sum.mean_h_max = kept > 0 ? h_acc / kept : std::numeric_limits<double>::quiet_NaN();
      csv.row({sum.surface, sum.optimizer, "mean", format_double(sum.mean_loss),
               format_double(sum.mean_h_max), format_int(sum.excluded)});
      summaries.push_back(sum);
    }
  csv.close();
  return summaries;
}

// convergence.csv: one optimal-rate row per (C, kappa, mode), heavy-ball
// baseline rows carry C = 0.
inline void run_convergence_sweep(const ExperimentConfig& cfg) {
  CsvWriter csv(out_path(cfg, "convergence.csv"));
  csv.row({"C", "kappa", "mode", "alpha_star", "beta_star", "rho_star", "one_minus_rho_star"});
  const auto emit = [&csv](int c, double kappa, const std::string& mode, const RateResult& r) {
    csv.row({format_int(c), format_double(kappa), mode, format_double(r.alpha_star),
             format_double(r.beta_star), format_double(r.rho), format_double(1.0 - r.rho)});
  };
  for (const std::string& mode : cfg.modes) {
    const TuneMode tm = parse_tune_mode(mode);
    for (const int c : cfg.capacities)
      for (const double kappa : cfg.kappas)
        emit(c, kappa, mode, optimal_rate(c, kappa, tm, cfg.grids));
    if (cfg.include_heavy_ball)
      for (const double kappa : cfg.kappas)
        emit(0, kappa, mode,
             optimal_rate(1, kappa, tm, cfg.grids, MomentumSystem::HeavyBall));
  }
  csv.close();
}

struct DiagnosticsSummary {
  std::string optimizer;
  double mean_buf_variance = 0.0;
  double mean_buf_cosine = 1.0;
  double mean_final_loss = 0.0;
  double mean_final_h_max = 0.0;
  double mean_path_dist = 0.0;
  int diverged = 0;
};

// diagnostics.csv: per-step rows for every optimizer and seed, with h_max
// sampled every sharpness_stride steps. diagnostics_summary.csv: per-optimizer
// means; buffer statistics average over records with occupancy >= 2.
inline std::vector<DiagnosticsSummary> run_diagnostics(const ExperimentConfig& cfg) {
  require_single_optimizer(cfg);
  const auto surface = make_surface(cfg.surface);
  const std::size_t n_opt = cfg.optimizers.size(), n_seed = cfg.seeds.size();
  std::vector<RunResult> slots(n_opt * n_seed);
  parallel_for(n_opt * n_seed, [&](std::size_t i) {
    const std::size_t oi = i / n_seed, si = i % n_seed;
    RunOptions opts;
    opts.sharpness_stride = cfg.sharpness_stride;
    slots[i] = run_single(*surface, cfg.optimizers[oi], cfg.seeds[si], cfg.steps, cfg.schedule,
                          cfg.init_mode, cfg.init_theta, opts);
  });

  CsvWriter csv(out_path(cfg, "diagnostics.csv"));
  csv.row({"optimizer", "seed", "step", "loss", "h_max", "path_dist", "buf_variance",
           "buf_cosine", "buf_occupancy", "cancel_index"});
  std::vector<DiagnosticsSummary> summaries;
  for (std::size_t oi = 0; oi < n_opt; ++oi) {
    DiagnosticsSummary sum;
    sum.optimizer = optimizer_label(cfg.optimizers[oi]);
    double var_acc = 0.0, cos_acc = 0.0, loss_acc = 0.0, h_acc = 0.0, path_acc = 0.0;
    long long stat_count = 0;
    int kept = 0;
    for (std::size_t si = 0; si < n_seed; ++si) {
      const RunResult& r = slots[oi * n_seed + si];
      for (const TrajectoryRecord& rec : r.records) {
        csv.row({sum.optimizer, format_int(static_cast<long long>(cfg.seeds[si])),
                 format_int(rec.step), format_double(rec.loss),
                 std::isnan(rec.h_max) ? std::string() : format_double(rec.h_max),
                 format_double(rec.path_dist), format_double(rec.buf_variance),
                 format_double(rec.buf_cosine), format_int(rec.buf_occupancy),
                 format_double(rec.cancel_index)});
        if (rec.buf_occupancy >= 2) {
          var_acc += rec.buf_variance;
          cos_acc += rec.buf_cosine;
          ++stat_count;
        }
      }
      if (r.diverged) {
        ++sum.diverged;
      } else {
        loss_acc += r.final_loss;
        h_acc += r.sharpness.h_max;
        path_acc += r.records.empty() ? 0.0 : r.records.back().path_dist;
        ++kept;
      }
    }
    sum.mean_buf_variance = stat_count > 0 ? var_acc / stat_count : 0.0;
    sum.mean_buf_cosine = stat_count > 0 ? cos_acc / stat_count : 1.0;
    sum.mean_final_loss = kept > 0 ? loss_acc / kept : std::numeric_limits<double>::quiet_NaN();
    sum.mean_final_h_max = kept > 0 ? h_acc / kept : std::numeric_limits<double>::quiet_NaN();
    sum.mean_path_dist = kept > 0 ? path_acc / kept : 0.0;
    summaries.push_back(sum);
  }
  csv.close();

  CsvWriter scsv(out_path(cfg, "diagnostics_summary.csv"));
  scsv.row({"optimizer", "mean_buf_variance", "mean_buf_cosine", "mean_final_loss",
            "mean_final_h_max", "mean_path_dist", "diverged"});
  for (const auto& s : summaries)
    scsv.row({s.optimizer, format_double(s.mean_buf_variance), format_double(s.mean_buf_cosine),
              format_double(s.mean_final_loss), format_double(s.mean_final_h_max),
              format_double(s.mean_path_dist), format_int(s.diverged)});
  scsv.close();
  return summaries;
}

// Gradient verification over seeded points in the surface's domain, skipping
// 1e-4 neighborhoods of sharpflat kinks.
struct GradCheckResult {
  double max_rel_error = 0.0;
  int points = 0;
};

inline GradCheckResult gradcheck_surface(const LossSurface& surface, int n_points,
                                         std::uint64_t seed) {
  SplitMix64 rng(seed);
  const auto [lo, hi] = surface.domain_bounds();
  const auto* sf = dynamic_cast<const SharpFlatLoss*>(&surface);
  GradCheckResult out;
  for (int p = 0; p < n_points; ++p) {
    Vec theta(static_cast<std::size_t>(surface.dim()));
    for (double& x : theta) {
      for (;;) {
        x = rng.uniform(lo, hi);
        if (sf == nullptr) break;
        const auto kinks = sf->kink_points();
        if (std::abs(x - kinks[0]) > 1e-4 && std::abs(x - kinks[1]) > 1e-4) break;
      }
    }
    const GradReport rep = check_grad(surface, theta);
    out.max_rel_error = std::max(out.max_rel_error, rep.max_rel_error);
    ++out.points;
  }
  return out;
}

}  // namespace cmlab
