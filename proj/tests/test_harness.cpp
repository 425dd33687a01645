#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cmlab/harness.hpp"

using namespace cmlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cmlab_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("optimizer config json round trip", "[harness]") {
  OptimizerConfig cfg;
  cfg.algorithm = Algorithm::AdamCm;
  cfg.alpha = 0.05;
  cfg.beta1 = 0.91;
  cfg.beta2 = 0.995;
  cfg.epsilon = 1e-7;
  cfg.capacity = 20;
  cfg.decay = 0.99;
  cfg.sam_enabled = true;
  cfg.sam_rho = 0.1;
  cfg.beta = 0.85;
  const OptimizerConfig back = optimizer_config_from_json(to_json(cfg));
  CHECK(back.algorithm == cfg.algorithm);
  CHECK(back.alpha == cfg.alpha);
  CHECK(back.beta1 == cfg.beta1);
  CHECK(back.beta2 == cfg.beta2);
  CHECK(back.epsilon == cfg.epsilon);
  CHECK(back.capacity == cfg.capacity);
  CHECK(back.decay == cfg.decay);
  CHECK(back.sam_enabled == cfg.sam_enabled);
  CHECK(back.sam_rho == cfg.sam_rho);
  CHECK(back.beta == cfg.beta);
}

TEST_CASE("experiment config parses the documented schema", "[harness]") {
  const auto j = nlohmann::json::parse(R"({
    "experiment": "escape_ratio",
    "surface": {"kind": "sharpflat", "s": 25.0, "dim": 10},
    "optimizers": [
      {"algorithm": "adam_cm", "lr": 0.05, "capacity": 20, "decay": 0.99},
      {"algorithm": "adam"}
    ],
    "steps": 500,
    "schedule": "constant",
    "n_seeds": 50,
    "init": {"mode": "uniform"},
    "out": "results"
  })");
  ExperimentConfig cfg;
  apply_config_json(cfg, j);
  CHECK(cfg.experiment == "escape_ratio");
  CHECK(cfg.surface.kind == "sharpflat");
  CHECK(cfg.surface.s == 25.0);
  CHECK(cfg.surface.dim == 10);
  REQUIRE(cfg.optimizers.size() == 2);
  CHECK(cfg.optimizers[0].algorithm == Algorithm::AdamCm);
  CHECK(cfg.optimizers[0].capacity == 20);
  CHECK(cfg.optimizers[1].algorithm == Algorithm::Adam);
  CHECK(cfg.steps == 500);
  CHECK(cfg.schedule == ScheduleMode::Constant);
  CHECK(cfg.seeds.size() == 50);
  CHECK(cfg.seeds.front() == 0);
  CHECK(cfg.seeds.back() == 49);
  CHECK(cfg.out_dir == "results");
}

TEST_CASE("config errors surface as usage errors", "[harness]") {
  ExperimentConfig cfg;
  CHECK_THROWS_AS(apply_config_json(cfg, nlohmann::json{{"schedule", "thirds"}}), UsageError);
  CHECK_THROWS_AS(apply_config_json(cfg, nlohmann::json{{"seeds", nlohmann::json::array()}}),
                  UsageError);
  CHECK_THROWS_AS(
      apply_config_json(cfg, nlohmann::json{{"optimizers", {{{"algorithm", "frobnicate"}}}}}),
      UsageError);
  CHECK_THROWS_AS(make_surface(SurfaceSpec{.kind = "warp"}), UsageError);
  CHECK_THROWS_WITH(make_surface(SurfaceSpec{.kind = "warp"}),
                    Catch::Matchers::ContainsSubstring("warp"));
}

TEST_CASE("uniform init is seeded and in bounds", "[harness]") {
  const auto surface = make_surface(SurfaceSpec{.kind = "sharpflat", .s = 10.0, .dim = 10});
  const Vec a = sample_uniform_init(*surface, 3);
  const Vec b = sample_uniform_init(*surface, 3);
  const Vec c = sample_uniform_init(*surface, 4);
  CHECK(a == b);
  CHECK(a != c);
  for (double x : a) {
    CHECK(x >= -5.0);
    CHECK(x < 5.0);
  }
}

TEST_CASE("run_single records a full deterministic trajectory", "[harness]") {
  const auto surface = make_surface(SurfaceSpec{.kind = "ackley"});
  OptimizerConfig cfg;
  cfg.algorithm = Algorithm::AdamCm;
  cfg.capacity = 20;
  cfg.decay = 0.99;
  const RunResult r1 = run_single(*surface, cfg, 1, 100, ScheduleMode::HalfDecay,
                                  InitMode::Uniform, {});
  const RunResult r2 = run_single(*surface, cfg, 1, 100, ScheduleMode::HalfDecay,
                                  InitMode::Uniform, {});
  REQUIRE(!r1.diverged);
  REQUIRE(r1.records.size() == 100);
  CHECK(r1.final_theta == r2.final_theta);
  CHECK(r1.final_loss == r2.final_loss);
  for (std::size_t k = 0; k < r1.records.size(); ++k) {
    CHECK(r1.records[k].loss == r2.records[k].loss);
    CHECK(r1.records[k].path_dist == r2.records[k].path_dist);
  }
  // Path distance is cumulative, steps strictly increasing.
  for (std::size_t k = 1; k < r1.records.size(); ++k) {
    CHECK(r1.records[k].step == r1.records[k - 1].step + 1);
    CHECK(r1.records[k].path_dist >= r1.records[k - 1].path_dist);
  }
}

TEST_CASE("escape classification on fixed inits", "[harness]") {
  ExperimentConfig cfg;
  cfg.surface = SurfaceSpec{.kind = "sharpflat", .s = 100.0, .dim = 1};
  cfg.steps = 500;
  cfg.schedule = ScheduleMode::Constant;
  cfg.seeds = {0};
  cfg.init_mode = InitMode::Fixed;
  cfg.init_theta = {3.0};
  cfg.out_dir = fresh_dir("escape_fixed").string();
  OptimizerConfig adam;
  adam.algorithm = Algorithm::Adam;
  adam.alpha = 0.05;
  cfg.optimizers = {adam};
  const auto res = run_escape_ratio(cfg);
  REQUIRE(res.size() == 1);
  CHECK(res[0].escaped == 0);  // converges to the nearest (sharp) minimum

  cfg.init_theta = {0.0};
  cfg.out_dir = fresh_dir("escape_origin").string();
  const auto res2 = run_escape_ratio(cfg);
  CHECK(res2[0].escaped == 1);  // already in the flat basin

  CHECK(res2[0].ratio == 1.0);
  CHECK(res2[0].total == 1);
}

TEST_CASE("escape requires the sharpflat surface", "[harness]") {
  ExperimentConfig cfg;
  cfg.surface.kind = "ackley";
  cfg.optimizers = {OptimizerConfig{}};
  CHECK_THROWS_AS(run_escape_ratio(cfg), UsageError);
}

TEST_CASE("seed table with one fixed seed equals the single run", "[harness]") {
  ExperimentConfig cfg;
  cfg.table_surfaces = {SurfaceSpec{.kind = "levy"}};
  cfg.steps = 120;
  cfg.seeds = {0};
  cfg.init_mode = InitMode::Fixed;
  cfg.init_theta = {4.0, -3.0};
  cfg.out_dir = fresh_dir("table_single").string();
  OptimizerConfig adam;
  adam.algorithm = Algorithm::Adam;
  cfg.optimizers = {adam};
  const auto summaries = run_seed_table(cfg);
  REQUIRE(summaries.size() == 1);
  const auto surface = make_surface(cfg.table_surfaces[0]);
  RunOptions opts;
  opts.keep_records = false;
  const RunResult direct = run_single(*surface, adam, 0, cfg.steps, cfg.schedule,
                                      InitMode::Fixed, cfg.init_theta, opts);
  CHECK(summaries[0].mean_loss == direct.final_loss);
  CHECK(summaries[0].mean_h_max == direct.sharpness.h_max);
  CHECK(summaries[0].excluded == 0);
}

TEST_CASE("trajectory csv bytes are identical across thread counts", "[harness]") {
  ExperimentConfig cfg;
  cfg.surface.kind = "ackley";
  cfg.steps = 60;
  cfg.seeds = {0, 1, 2, 3, 4, 5, 6, 7};
  OptimizerConfig opt;
  opt.algorithm = Algorithm::AdamCm;
  opt.capacity = 5;
  opt.decay = 0.7;
  cfg.optimizers = {opt};

  const fs::path d1 = fresh_dir("threads1");
  const fs::path d4 = fresh_dir("threads4");
  setenv("CMLAB_THREADS", "1", 1);
  cfg.out_dir = d1.string();
  run_trajectory(cfg);
  setenv("CMLAB_THREADS", "4", 1);
  cfg.out_dir = d4.string();
  run_trajectory(cfg);
  unsetenv("CMLAB_THREADS");
  const std::string a = slurp(d1 / "trajectory.csv");
  CHECK(a == slurp(d4 / "trajectory.csv"));
  CHECK(a.substr(0, a.find('\n')) ==
        "seed,step,loss,lr,buf_variance,buf_cosine,cancel_index,path_dist");
}

TEST_CASE("convergence sweep emits the pinned columns", "[harness]") {
  ExperimentConfig cfg;
  cfg.capacities = {2};
  cfg.kappas = {1.0, 4.0};
  cfg.modes = {"tune_both"};
  cfg.grids.alpha_points = 10;
  cfg.grids.beta_points = 5;
  cfg.grids.h_points = 12;
  cfg.out_dir = fresh_dir("sweep").string();
  run_convergence_sweep(cfg);
  const std::string text = slurp(fs::path(cfg.out_dir) / "convergence.csv");
  CHECK(text.substr(0, text.find('\n')) ==
        "C,kappa,mode,alpha_star,beta_star,rho_star,one_minus_rho_star");
  // kappa=1 rows exist for every requested mode, plus heavy-ball baseline rows.
  CHECK(text.find("2,1,tune_both") != std::string::npos);
  CHECK(text.find("0,1,tune_both") != std::string::npos);
  CHECK(text.find("2,4,tune_both") != std::string::npos);
}

TEST_CASE("diagnostics summary separates cm and cg buffers", "[harness]") {
  ExperimentConfig cfg;
  cfg.surface.kind = "ackley";
  cfg.steps = 80;
  cfg.seeds = {0, 1};
  cfg.sharpness_stride = 40;
  OptimizerConfig cm, cg;
  cm.algorithm = Algorithm::AdamCm;
  cg.algorithm = Algorithm::AdamCg;
  cm.capacity = cg.capacity = 10;
  cm.decay = cg.decay = 0.9;
  cfg.optimizers = {cm, cg};
  cfg.out_dir = fresh_dir("diag").string();
  const auto summaries = run_diagnostics(cfg);
  REQUIRE(summaries.size() == 2);
  CHECK(summaries[0].optimizer == "adam_cm");
  CHECK(summaries[1].optimizer == "adam_cg");
  for (const auto& s : summaries) {
    CHECK(std::isfinite(s.mean_buf_variance));
    CHECK(s.mean_buf_variance >= 0.0);
    CHECK(std::isfinite(s.mean_buf_cosine));
  }
  CHECK(fs::exists(fs::path(cfg.out_dir) / "diagnostics.csv"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "diagnostics_summary.csv"));
}

TEST_CASE("gradcheck over seeded domain points", "[harness]") {
  const auto levy = make_surface(SurfaceSpec{.kind = "levy"});
  const auto res = gradcheck_surface(*levy, 100, 0);
  CHECK(res.points == 100);
  CHECK(res.max_rel_error < 1e-5);
  const auto sf = make_surface(SurfaceSpec{.kind = "sharpflat", .s = 100.0, .dim = 3});
  CHECK(gradcheck_surface(*sf, 100, 0).max_rel_error < 1e-5);
}

TEST_CASE("format_double is shortest-round-trip stable", "[harness]") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-0.25) == "-0.25");
  const double x = 0.1 + 0.2;
  CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}
