#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

// End-to-end checks against the built binary.

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

CmdResult run_cli(const std::string& args) {
  std::string cmd = std::string(APGX_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[512];
  while (fgets(buf, sizeof(buf), pipe)) out += buf;
  int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

fs::path fresh_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("apgx_cli_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

// wall_ms is measured time and the one column exempt from determinism
std::string drop_wall_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    size_t cut = line.rfind(',');
    out += line.substr(0, cut) + "\n";
  }
  return out;
}

const std::string kTinyConfig =
    "[run]\n"
    "env = point_mass\n"
    "iterations = 2\n"
    "eval_episodes = 1\n"
    "[ppo]\n"
    "lanes = 4\n"
    "rollout_steps = 4\n"
    "[apg]\n"
    "agents = 4\n"
    "horizon = 2\n"
    "epochs = 1\n";

}  // namespace

TEST_CASE("train writes a csv with one data row per iteration") {
  fs::path dir = fresh_dir("train");
  write_file(dir / "run.cfg", kTinyConfig);
  CmdResult r = run_cli("train --config " + (dir / "run.cfg").string() +
                        " --out " + (dir / "out").string());
  CHECK(r.exit_code == 0);
  std::string csv = read_file(dir / "out" / "metrics.csv");
  CHECK(count_lines(csv) == 3);  // header + 2 rows
  CHECK(fs::exists(dir / "out" / "policy.ckpt"));
  CHECK(fs::exists(dir / "out" / "critic.ckpt"));
  CHECK(fs::exists(dir / "out" / "manifest.txt"));
  fs::remove_all(dir);
}

TEST_CASE("missing env name exits with the config code") {
  fs::path dir = fresh_dir("noenv");
  write_file(dir / "bad.cfg", "[run]\niterations = 2\n");
  CmdResult r = run_cli("train --config " + (dir / "bad.cfg").string() +
                        " --out " + (dir / "out").string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("run.env") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("unknown config keys exit 2 with a line-numbered message") {
  fs::path dir = fresh_dir("badkey");
  write_file(dir / "bad.cfg", "[run]\nenv = point_mass\nwidgets = 9\n");
  CmdResult r = run_cli("train --config " + (dir / "bad.cfg").string() +
                        " --out " + (dir / "out").string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("bad.cfg:3") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("a missing config file exits 2") {
  CmdResult r = run_cli("train --config /nonexistent/x.cfg --out /tmp/apgx_nowhere");
  CHECK(r.exit_code == 2);
}

TEST_CASE("repeated seeds give identical csv output") {
  fs::path dir = fresh_dir("seed");
  write_file(dir / "run.cfg", kTinyConfig);
  std::string base = "train --config " + (dir / "run.cfg").string() + " --seed 7 --out ";
  CmdResult a = run_cli(base + (dir / "a").string());
  CmdResult b = run_cli(base + (dir / "b").string());
  CHECK(a.exit_code == 0);
  CHECK(b.exit_code == 0);
  std::string ca = read_file(dir / "a" / "metrics.csv");
  std::string cb = read_file(dir / "b" / "metrics.csv");
  CHECK(drop_wall_column(ca) == drop_wall_column(cb));
  fs::remove_all(dir);
}

TEST_CASE("seed and override flags reach the config") {
  fs::path dir = fresh_dir("ov");
  write_file(dir / "run.cfg", kTinyConfig);
  CmdResult r = run_cli("train --config " + (dir / "run.cfg").string() +
                        " --override run.iterations=3 --seed 5 --out " +
                        (dir / "out").string());
  CHECK(r.exit_code == 0);
  CHECK(count_lines(read_file(dir / "out" / "metrics.csv")) == 4);
  std::string manifest = read_file(dir / "out" / "manifest.txt");
  CHECK(manifest.find("seed = 5") != std::string::npos);

  CmdResult bad = run_cli("train --config " + (dir / "run.cfg").string() +
                          " --override ppo.widgets=1 --out " + (dir / "o2").string());
  CHECK(bad.exit_code == 2);
  fs::remove_all(dir);
}

TEST_CASE("compare emits per-mode csvs and a three-row summary") {
  fs::path dir = fresh_dir("cmp");
  write_file(dir / "run.cfg", kTinyConfig);
  CmdResult r = run_cli("compare --config " + (dir / "run.cfg").string() +
                        " --seeds 1 --out " + (dir / "out").string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(dir / "out" / "augmented_seed1.csv"));
  CHECK(fs::exists(dir / "out" / "ppo_baseline_seed1.csv"));
  CHECK(fs::exists(dir / "out" / "apg_only_seed1.csv"));
  std::string summary = read_file(dir / "out" / "summary.csv");
  CHECK(count_lines(summary) == 4);  // header + one row per mode
  CHECK(summary.find("augmented,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("sweep emits one summary row per axis value") {
  fs::path dir = fresh_dir("sweep");
  write_file(dir / "run.cfg", kTinyConfig);
  CmdResult r = run_cli("sweep --config " + (dir / "run.cfg").string() +
                        " --axis f --values 1,2 --seeds 1 --out " +
                        (dir / "out").string());
  CHECK(r.exit_code == 0);
  std::string summary = read_file(dir / "out" / "sweep_summary.csv");
  CHECK(count_lines(summary) == 3);  // header + 2 values
  CHECK(fs::exists(dir / "out" / "sweep_f1_seed1.csv"));
  CHECK(fs::exists(dir / "out" / "sweep_f2_seed1.csv"));
  CHECK(fs::exists(dir / "out" / "baseline_seed1.csv"));

  CmdResult bad = run_cli("sweep --config " + (dir / "run.cfg").string() +
                          " --axis x --values 1 --out " + (dir / "o2").string());
  CHECK(bad.exit_code == 2);
  fs::remove_all(dir);
}

TEST_CASE("gradcheck runs its suites quickly and cleanly") {
  CmdResult r = run_cli("gradcheck --samples 50");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("FAIL") == std::string::npos);
  CHECK(r.output.find("jacobians: point_mass") != std::string::npos);
}
