#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "qchunk/agent.hpp"
#include "qchunk/datagen.hpp"
#include "qchunk/env.hpp"

namespace qchunk {

// CLI exit taxonomy: 2 config, 3 I/O, 4 numeric failure.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvalConfig {
  int episodes = 50;
  long cadence = 0;  // 0 = auto: max(steps/50, 1000)
  int stride = 5;
  int coverage_grid = 20;
};

struct IoConfig {
  std::string run_dir;       // falls back to $QC_RUN_DIR, then "./run"
  std::string dataset_path;
  std::uint64_t seed = 0;
};

struct RunConfig {
  EnvSpec env;
  PlayGenConfig gen;
  long gen_transitions = 100000;
  AgentConfig agent;
  EvalConfig eval;
  IoConfig io;
};

RunConfig default_config();

// Layered resolution: built-in defaults <- file <- key=value overrides.
// Lines are "section.key = value"; '#' starts a comment. Unknown keys and
// out-of-range values raise ConfigError naming the key.
RunConfig parse_config(const std::string& path,
                       const std::vector<std::string>& overrides);

// Applies one "key=value" assignment.
void apply_config_line(RunConfig& cfg, const std::string& key,
                       const std::string& value);

// Deterministic echo of every key, suitable for config.resolved and exact
// reruns.
std::string render_config(const RunConfig& cfg);

}  // namespace qchunk
