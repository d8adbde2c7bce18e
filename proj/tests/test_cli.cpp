#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "qchunk/config.hpp"
#include "qchunk/pipeline.hpp"

using namespace qchunk;

namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() /
          ("qchunk_cli_" + std::to_string(std::rand()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const {
    return (dir / name).string();
  }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(QCHUNK_CLI_PATH) + " " + args +
                          " >/dev/null 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

// Fast chain workload for end-to-end runs.
const char* kTinyConfig =
    "env.kind = discrete-chain\n"
    "env.chain_states = 4\n"
    "env.episode_len = 25\n"
    "agent.variant = qc\n"
    "agent.h = 2\n"
    "agent.n_samples = 4\n"
    "agent.batch = 16\n"
    "agent.width = 16\n"
    "agent.depth = 1\n"
    "agent.flow_steps = 4\n"
    "agent.offline_steps = 150\n"
    "agent.online_steps = 150\n"
    "eval.episodes = 3\n"
    "eval.cadence = 75\n"
    "gen.num_transitions = 1200\n";

}  // namespace

TEST_CASE("defaults carry the documented common hyperparameters") {
  const RunConfig cfg = parse_config("", {});
  CHECK(cfg.agent.gamma == 0.99);
  CHECK(cfg.agent.lr == 3e-4);
  CHECK(cfg.agent.tau == 0.005);
  CHECK(cfg.agent.batch == 256);
  CHECK(cfg.agent.flow_steps == 10);
  CHECK(cfg.agent.k == 2);
  CHECK(cfg.agent.h == 5);
  CHECK(cfg.agent.n_samples == 32);
}

TEST_CASE("an empty config file resolves to the defaults") {
  TempDir tmp;
  const std::string path = tmp / "empty.cfg";
  write_file(path, "# nothing but comments\n\n");
  const RunConfig cfg = parse_config(path, {});
  CHECK(cfg.agent.gamma == 0.99);
  CHECK(cfg.agent.batch == 256);
}

TEST_CASE("file values and overrides layer in order") {
  TempDir tmp;
  const std::string path = tmp / "layered.cfg";
  write_file(path, "agent.h = 3\nagent.gamma = 0.9  # trailing comment\n");
  const RunConfig cfg = parse_config(path, {"agent.h=5", "io.seed=42"});
  CHECK(cfg.agent.h == 5);       // override wins
  CHECK(cfg.agent.gamma == 0.9); // file wins over default
  CHECK(cfg.io.seed == 42);
}

TEST_CASE("unknown keys and range violations name the offender") {
  CHECK_THROWS_WITH_AS(parse_config("", {"agent.bogus=1"}),
                       doctest::Contains("agent.bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("", {"agent.gamma=1.5"}),
                       doctest::Contains("agent.gamma"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("", {"agent.h=zero"}),
                       doctest::Contains("agent.h"), ConfigError);
}

TEST_CASE("resolved config echo reproduces itself") {
  TempDir tmp;
  const RunConfig cfg =
      parse_config("", {"agent.h=7", "agent.variant=qc-fql",
                        "env.kind=discrete-chain", "io.seed=9"});
  const std::string echo = render_config(cfg);
  const std::string path = tmp / "echo.cfg";
  write_file(path, echo);
  const RunConfig back = parse_config(path, {});
  CHECK(render_config(back) == echo);
}

TEST_CASE("cli: full pipeline runs end to end") {
  TempDir tmp;
  const std::string cfg_path = tmp / "tiny.cfg";
  write_file(cfg_path, kTinyConfig);
  const std::string data = tmp / "data.qcd1";
  const std::string run_dir = tmp / "run";

  CHECK(run_cli("gen-data --config " + cfg_path + " --out " + data) == 0);
  CHECK(fs::exists(data));

  CHECK(run_cli("train --config " + cfg_path + " --data " + data +
                " --run-dir " + run_dir) == 0);
  CHECK(fs::exists(run_dir + "/log.csv"));
  CHECK(fs::exists(run_dir + "/config.resolved"));
  CHECK(fs::exists(run_dir + "/checkpoint.qckp"));
  CHECK(fs::exists(run_dir + "/curves.svg"));

  CHECK(run_cli("eval --config " + cfg_path + " --checkpoint " + run_dir +
                "/checkpoint.qckp") == 0);
  CHECK(run_cli("plot --log " + run_dir + "/log.csv --out " + (tmp / "p.svg")) ==
        0);
  CHECK(run_cli("oracle --config " + cfg_path + " --n 3 --out-dir " +
                (tmp / "oracle")) == 0);
  CHECK(fs::exists(tmp / "oracle" + std::string("/bias.csv")));
}

TEST_CASE("cli: training twice with one seed is byte-identical") {
  TempDir tmp;
  const std::string cfg_path = tmp / "tiny.cfg";
  write_file(cfg_path, kTinyConfig);
  const std::string data = tmp / "data.qcd1";
  REQUIRE(run_cli("gen-data --config " + cfg_path + " --out " + data) == 0);

  const std::string r1 = tmp / "r1", r2 = tmp / "r2";
  REQUIRE(run_cli("train --config " + cfg_path + " --data " + data +
                  " --run-dir " + r1) == 0);
  REQUIRE(run_cli("train --config " + cfg_path + " --data " + data +
                  " --run-dir " + r2) == 0);
  CHECK(slurp(r1 + "/log.csv") == slurp(r2 + "/log.csv"));
  CHECK(slurp(r1 + "/checkpoint.qckp") == slurp(r2 + "/checkpoint.qckp"));
}

TEST_CASE("cli: exit codes distinguish config and io failures") {
  TempDir tmp;
  const std::string cfg_path = tmp / "tiny.cfg";
  write_file(cfg_path, kTinyConfig);

  // unknown key -> 2
  CHECK(run_cli("gen-data --config " + cfg_path +
                " --set foo.bar=1 --out " + (tmp / "x.qcd1")) == 2);
  // range violation -> 2
  CHECK(run_cli("gen-data --config " + cfg_path +
                " --set agent.gamma=1.5 --out " + (tmp / "x.qcd1")) == 2);
  // missing dataset -> 3
  CHECK(run_cli("train --config " + cfg_path + " --data " +
                (tmp / "missing.qcd1") + " --run-dir " + (tmp / "r")) == 3);
  // missing checkpoint -> 3
  CHECK(run_cli("eval --config " + cfg_path + " --checkpoint " +
                (tmp / "missing.qckp")) == 3);
}
