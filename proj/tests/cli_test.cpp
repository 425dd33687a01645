// Exercises the installed binary end to end: exit codes, output files, and
// byte-level determinism across thread counts.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "cmlab_cli_out.txt";
  const std::string cmd = std::string(CMLAB_CLI_PATH) + " " + args + " > " + log.string() +
                          " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  res.output = ss.str();
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cmlab_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("escape subcommand writes escape.csv and exits 0", "[cli]") {
  const fs::path dir = fresh_dir("escape");
  const auto res = run_cli(
      "escape --surface sharpflat --s 25 --dim 10 --optimizer adam_cm --capacity 20 "
      "--decay 0.99 --lr 0.05 --steps 60 --seeds 6 --schedule constant --out " +
      dir.string());
  CAPTURE(res.output);
  CHECK(res.exit_code == 0);
  CHECK(fs::exists(dir / "escape.csv"));
  const std::string text = slurp(dir / "escape.csv");
  CHECK(text.substr(0, text.find('\n')) ==
        "seed,s,dim,optimizer,escaped,final_loss,final_inf_norm");
}

TEST_CASE("unknown optimizer exits 2 and echoes the token", "[cli]") {
  const auto res = run_cli("escape --surface sharpflat --optimizer frobnicate --steps 5");
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("frobnicate") != std::string::npos);
}

TEST_CASE("unknown surface exits 2 and echoes the token", "[cli]") {
  const auto res = run_cli("gradcheck --surface levy9000");
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("levy9000") != std::string::npos);
}

TEST_CASE("unknown subcommand exits 2", "[cli]") {
  CHECK(run_cli("transmogrify").exit_code == 2);
}

TEST_CASE("gradcheck passes on levy", "[cli]") {
  const auto res = run_cli("gradcheck --surface levy");
  CAPTURE(res.output);
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("max_rel_error") != std::string::npos);
}

TEST_CASE("trajectory output is byte-identical across reruns and thread counts", "[cli]") {
  const fs::path d1 = fresh_dir("traj1");
  const fs::path d2 = fresh_dir("traj2");
  const std::string common =
      "trajectory --surface ackley --optimizer adam_cm --capacity 20 --decay 0.99 --lr 0.1 "
      "--steps 40 --seed-list 0,1,2 --out ";
  REQUIRE(std::system(("CMLAB_THREADS=1 " + std::string(CMLAB_CLI_PATH) + " " + common +
                       d1.string() + " > /dev/null 2>&1")
                          .c_str()) == 0);
  REQUIRE(std::system(("CMLAB_THREADS=8 " + std::string(CMLAB_CLI_PATH) + " " + common +
                       d2.string() + " > /dev/null 2>&1")
                          .c_str()) == 0);
  CHECK(slurp(d1 / "trajectory.csv") == slurp(d2 / "trajectory.csv"));
}

TEST_CASE("converge subcommand writes the sweep csv", "[cli]") {
  const fs::path dir = fresh_dir("converge");
  const auto res = run_cli(
      "converge --capacities 2 --kappas 1,4 --modes tune_both --out " + dir.string());
  CAPTURE(res.output);
  CHECK(res.exit_code == 0);
  CHECK(fs::exists(dir / "convergence.csv"));
}

TEST_CASE("config file drives the run and flags override it", "[cli]") {
  const fs::path dir = fresh_dir("config");
  const fs::path cfg_path = dir / "cfg.json";
  {
    std::ofstream out(cfg_path);
    out << R"({
      "surface": {"kind": "sharpflat", "s": 10.0, "dim": 2},
      "optimizers": [{"algorithm": "adam", "lr": 0.05}],
      "steps": 30,
      "schedule": "constant",
      "n_seeds": 4,
      "out": ")" << dir.string() << R"("
    })";
  }
  const auto res = run_cli("escape --config " + cfg_path.string());
  CAPTURE(res.output);
  CHECK(res.exit_code == 0);
  CHECK(fs::exists(dir / "escape.csv"));
  // Bad JSON is a usage error.
  {
    std::ofstream out(cfg_path);
    out << "{ not json";
  }
  CHECK(run_cli("escape --config " + cfg_path.string()).exit_code == 2);
}
