// cmlab command line: seeded optimizer experiments on analytic loss surfaces
// plus the spectral convergence sweep. Exit codes: 0 success, 1 runtime
// failure, 2 usage or configuration error.

#include <cstdint>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmlab/harness.hpp"

namespace {

using cmlab::ExperimentConfig;
using cmlab::UsageError;

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      seeds.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw UsageError("bad seed \"" + tok + "\" in --seed-list");
    }
  }
  if (seeds.empty()) throw UsageError("--seed-list contained no seeds");
  return seeds;
}

std::vector<double> parse_double_list(const std::string& csv, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw UsageError("bad value \"" + tok + "\" in " + std::string(flag));
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + " contained no values");
  return out;
}

// Per-subcommand option set layered over config-file values.
struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> optimizer_tokens;
  std::string surface;
  double s = 0.0;
  int dim = 0;
  std::string quad_diag;
  double lr = 0.0;
  double beta1 = -1.0, beta2 = -1.0, epsilon = -1.0;
  int capacity = 0;
  double decay = 0.0;
  bool sam = false;
  double sam_rho = 0.0;
  long long steps = 0;
  std::string schedule;
  int n_seeds = 0;
  std::string seed_list;
  std::string init_point;
  int sharpness_stride = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its fields");
  cmd->add_option("--out", o.out_dir, "output directory for CSV files");
  cmd->add_option("--optimizer", o.optimizer_tokens,
                  "optimizer name (repeatable): sgd, sgd_cg, sgd_cm, adam, adam_cg, adam_cm, simple_cm");
  cmd->add_option("--surface", o.surface,
                  "surface: ackley, gp, levy, ackley_rosenbrock, sharpflat, quadratic, mlp");
  cmd->add_option("--s", o.s, "sharpflat sharpness coefficient");
  cmd->add_option("--dim", o.dim, "sharpflat dimension");
  cmd->add_option("--quad-diag", o.quad_diag, "quadratic Hessian diagonal, comma separated");
  cmd->add_option("--lr", o.lr, "base step size");
  cmd->add_option("--beta1", o.beta1, "first-moment decay");
  cmd->add_option("--beta2", o.beta2, "second-moment decay");
  cmd->add_option("--epsilon", o.epsilon, "denominator epsilon");
  cmd->add_option("--capacity", o.capacity, "buffer capacity C");
  cmd->add_option("--decay", o.decay, "buffer priority decay lambda");
  cmd->add_flag("--sam", o.sam, "wrap the optimizer in a SAM outer step");
  cmd->add_option("--sam-rho", o.sam_rho, "SAM perturbation radius");
  cmd->add_option("--steps", o.steps, "steps per run");
  cmd->add_option("--schedule", o.schedule, "lr schedule: constant or half_decay");
  cmd->add_option("--seeds", o.n_seeds, "number of seeds (0..N-1)");
  cmd->add_option("--seed-list", o.seed_list, "explicit comma-separated seeds");
  cmd->add_option("--init", o.init_point, "fixed init point, comma separated");
  cmd->add_option("--sharpness-stride", o.sharpness_stride,
                  "diagnostics: compute h_max every this many steps");
}

ExperimentConfig build_config(const CommonOpts& o, const std::string& experiment) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) cfg = cmlab::load_config_file(o.config_path);
  cfg.experiment = experiment;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (!o.surface.empty()) cfg.surface.kind = o.surface;
  if (o.s > 0.0) cfg.surface.s = o.s;
  if (o.dim > 0) cfg.surface.dim = o.dim;
  if (!o.quad_diag.empty()) cfg.surface.quad_diag = parse_double_list(o.quad_diag, "--quad-diag");
  if (!o.optimizer_tokens.empty()) {
    cfg.optimizers.clear();
    for (const std::string& tok : o.optimizer_tokens)
      cfg.optimizers.push_back(cmlab::optimizer_from_token(tok));
  }
  if (cfg.optimizers.empty()) cfg.optimizers.push_back(cmlab::OptimizerConfig{});
  for (cmlab::OptimizerConfig& opt : cfg.optimizers) {
    if (o.lr > 0.0) opt.alpha = o.lr;
    if (o.beta1 >= 0.0) opt.beta1 = o.beta1;
    if (o.beta2 >= 0.0) opt.beta2 = o.beta2;
    if (o.epsilon >= 0.0) opt.epsilon = o.epsilon;
    if (o.capacity > 0) opt.capacity = o.capacity;
    if (o.decay > 0.0) opt.decay = o.decay;
    if (o.sam) opt.sam_enabled = true;
    if (o.sam_rho > 0.0) opt.sam_rho = o.sam_rho;
  }
  if (o.steps > 0) cfg.steps = o.steps;
  if (!o.schedule.empty()) cfg.schedule = cmlab::parse_schedule(o.schedule);
  if (o.n_seeds > 0) {
    cfg.seeds.clear();
    for (std::uint64_t s = 0; s < static_cast<std::uint64_t>(o.n_seeds); ++s)
      cfg.seeds.push_back(s);
  }
  if (!o.seed_list.empty()) cfg.seeds = parse_seed_list(o.seed_list);
  if (!o.init_point.empty()) {
    cfg.init_mode = cmlab::InitMode::Fixed;
    cfg.init_theta = parse_double_list(o.init_point, "--init");
  }
  if (o.sharpness_stride > 0) cfg.sharpness_stride = o.sharpness_stride;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cmlab: memory-augmented optimizer experiments"};
  app.require_subcommand(1);

  CommonOpts traj_o, esc_o, table_o, diag_o, grad_o;
  CLI::App* traj = app.add_subcommand("trajectory", "seeded optimization runs, per-step records");
  add_common(traj, traj_o);
  CLI::App* esc = app.add_subcommand("escape", "escape-ratio study on the sharp/flat family");
  add_common(esc, esc_o);
  CLI::App* table = app.add_subcommand("table", "final loss and sharpness across seeds");
  add_common(table, table_o);
  CLI::App* diag = app.add_subcommand("diagnose", "buffer diagnostics and sharpness tracking");
  add_common(diag, diag_o);
  CLI::App* grad = app.add_subcommand("gradcheck", "verify analytic gradients by finite differences");
  add_common(grad, grad_o);
  int grad_points = 100;
  std::uint64_t grad_seed = 0;
  grad->add_option("--points", grad_points, "number of random probe points");
  grad->add_option("--seed", grad_seed, "probe RNG seed");

  CommonOpts conv_o;
  CLI::App* conv = app.add_subcommand("converge", "quadratic convergence-rate sweep");
  add_common(conv, conv_o);
  std::string conv_caps, conv_kappas, conv_modes;
  bool no_heavy_ball = false;
  int refine_rounds = 0;
  conv->add_option("--capacities", conv_caps, "buffer sizes, comma separated");
  conv->add_option("--kappas", conv_kappas, "condition numbers, comma separated");
  conv->add_option("--modes", conv_modes, "tune_both and/or fixed_beta, comma separated");
  conv->add_flag("--no-heavy-ball", no_heavy_ball, "skip the classical-momentum baseline rows");
  conv->add_option("--refine-rounds", refine_rounds, "grid refinement rounds around the argmin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (traj->parsed()) {
      cmlab::run_trajectory(build_config(traj_o, "trajectory"));
    } else if (esc->parsed()) {
      const auto summaries = cmlab::run_escape_ratio(build_config(esc_o, "escape_ratio"));
      for (const auto& s : summaries)
        std::cout << s.optimizer << " escape_ratio " << s.escaped << "/" << s.total << " = "
                  << s.ratio << "\n";
    } else if (table->parsed()) {
      const auto summaries = cmlab::run_seed_table(build_config(table_o, "seed_table"));
      for (const auto& s : summaries)
        std::cout << s.surface << " " << s.optimizer << " mean_loss " << s.mean_loss
                  << " mean_h_max " << s.mean_h_max << " excluded " << s.excluded << "\n";
    } else if (diag->parsed()) {
      const auto summaries = cmlab::run_diagnostics(build_config(diag_o, "diagnostics"));
      for (const auto& s : summaries)
        std::cout << s.optimizer << " mean_buf_variance " << s.mean_buf_variance
                  << " mean_buf_cosine " << s.mean_buf_cosine << "\n";
    } else if (grad->parsed()) {
      ExperimentConfig cfg = build_config(grad_o, "gradcheck");
      const auto surface = cmlab::make_surface(cfg.surface);
      const auto res = cmlab::gradcheck_surface(*surface, grad_points, grad_seed);
      std::cout << surface->name() << " max_rel_error " << res.max_rel_error << " over "
                << res.points << " points\n";
      if (!(res.max_rel_error < 1e-5)) {
        std::cerr << "gradcheck failed: max_rel_error " << res.max_rel_error << " >= 1e-5\n";
        return 1;
      }
    } else if (conv->parsed()) {
      ExperimentConfig cfg = build_config(conv_o, "convergence_sweep");
      if (!conv_caps.empty()) {
        cfg.capacities.clear();
        for (double c : parse_double_list(conv_caps, "--capacities"))
          cfg.capacities.push_back(static_cast<int>(c));
      }
      if (!conv_kappas.empty()) cfg.kappas = parse_double_list(conv_kappas, "--kappas");
      if (!conv_modes.empty()) {
        cfg.modes.clear();
        std::stringstream ss(conv_modes);
        std::string tok;
        while (std::getline(ss, tok, ','))
          if (!tok.empty()) cfg.modes.push_back(tok);
      }
      if (no_heavy_ball) cfg.include_heavy_ball = false;
      if (refine_rounds > 0) cfg.grids.refine_rounds = refine_rounds;
      cmlab::run_convergence_sweep(cfg);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
