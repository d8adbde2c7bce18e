#include "qchunk/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace qchunk {

RunConfig default_config() { return RunConfig{}; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expect) {
  throw ConfigError("config error: " + key + "=" + value + " (" + expect +
                    ")");
}

long parse_int(const std::string& key, const std::string& value, long lo,
               long hi) {
  long v = 0;
  try {
    std::size_t pos = 0;
    v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    bad_value(key, value, "expected integer");
  }
  if (v < lo || v > hi)
    bad_value(key, value, "out of range [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
  return v;
}

double parse_real(const std::string& key, const std::string& value, double lo,
                  double hi, bool lo_open = false, bool hi_open = false) {
  double v = 0;
  try {
    std::size_t pos = 0;
    v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    bad_value(key, value, "expected real number");
  }
  const bool lo_ok = lo_open ? v > lo : v >= lo;
  const bool hi_ok = hi_open ? v < hi : v <= hi;
  if (!lo_ok || !hi_ok)
    bad_value(key, value, std::string("out of range ") +
                              (lo_open ? "(" : "[") + std::to_string(lo) +
                              ", " + std::to_string(hi) +
                              (hi_open ? ")" : "]"));
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    bad_value(key, value, "expected unsigned integer");
  }
}

}  // namespace

void apply_config_line(RunConfig& cfg, const std::string& key,
                       const std::string& value) {
  // env
  if (key == "env.kind") {
    try {
      cfg.env.kind = env_kind_from_string(value);
    } catch (const std::exception&) {
      bad_value(key, value, "expected discrete-chain or point-blocks");
    }
  } else if (key == "env.chain_states") {
    cfg.env.chain_states = static_cast<int>(parse_int(key, value, 2, 64));
  } else if (key == "env.episode_len") {
    cfg.env.episode_len = static_cast<int>(parse_int(key, value, 1, 1000000));
  }
  // gen
  else if (key == "gen.pause_prob") {
    cfg.gen.pause_prob = parse_real(key, value, 0.0, 1.0);
  } else if (key == "gen.pause_min") {
    cfg.gen.pause_min = static_cast<int>(parse_int(key, value, 1, 10000));
  } else if (key == "gen.pause_max") {
    cfg.gen.pause_max = static_cast<int>(parse_int(key, value, 1, 10000));
  } else if (key == "gen.segment_min") {
    cfg.gen.segment_min = static_cast<int>(parse_int(key, value, 1, 10000));
  } else if (key == "gen.segment_max") {
    cfg.gen.segment_max = static_cast<int>(parse_int(key, value, 1, 10000));
  } else if (key == "gen.p_task") {
    cfg.gen.p_task = parse_real(key, value, 0.0, 1.0);
  } else if (key == "gen.action_noise") {
    cfg.gen.action_noise = parse_real(key, value, 0.0, 10.0);
  } else if (key == "gen.smoothing") {
    cfg.gen.smoothing = parse_real(key, value, 0.0, 1.0, /*lo_open=*/true);
  } else if (key == "gen.num_transitions") {
    cfg.gen_transitions = parse_int(key, value, 1, 1000000000L);
  }
  // agent
  else if (key == "agent.variant") {
    try {
      cfg.agent.variant = variant_from_string(value);
    } catch (const std::exception&) {
      bad_value(key, value, "expected qc, qc-fql, bfn, fql, bfn-n or fql-n");
    }
  } else if (key == "agent.h") {
    cfg.agent.h = static_cast<int>(parse_int(key, value, 1, 1000));
  } else if (key == "agent.n_samples") {
    cfg.agent.n_samples = static_cast<int>(parse_int(key, value, 1, 100000));
  } else if (key == "agent.k") {
    cfg.agent.k = static_cast<int>(parse_int(key, value, 1, 64));
  } else if (key == "agent.alpha") {
    cfg.agent.alpha = parse_real(key, value, 0.0, 1e9);
  } else if (key == "agent.gamma") {
    cfg.agent.gamma = parse_real(key, value, 0.0, 1.0, false, /*hi_open=*/true);
  } else if (key == "agent.tau") {
    cfg.agent.tau = parse_real(key, value, 0.0, 1.0, /*lo_open=*/true);
  } else if (key == "agent.lr") {
    cfg.agent.lr = parse_real(key, value, 0.0, 10.0, /*lo_open=*/true);
  } else if (key == "agent.flow_steps") {
    cfg.agent.flow_steps = static_cast<int>(parse_int(key, value, 1, 10000));
  } else if (key == "agent.batch") {
    cfg.agent.batch = static_cast<int>(parse_int(key, value, 1, 1000000));
  } else if (key == "agent.width") {
    cfg.agent.width = static_cast<int>(parse_int(key, value, 1, 100000));
  } else if (key == "agent.depth") {
    cfg.agent.depth = static_cast<int>(parse_int(key, value, 0, 64));
  } else if (key == "agent.activation") {
    if (value == "gelu") cfg.agent.activation = Activation::gelu;
    else if (value == "relu") cfg.agent.activation = Activation::relu;
    else bad_value(key, value, "expected gelu or relu");
  } else if (key == "agent.offline_steps") {
    cfg.agent.offline_steps = parse_int(key, value, 0, 1000000000L);
  } else if (key == "agent.online_steps") {
    cfg.agent.online_steps = parse_int(key, value, 0, 1000000000L);
  } else if (key == "agent.utd") {
    cfg.agent.utd = static_cast<int>(parse_int(key, value, 1, 1000));
  }
  // eval
  else if (key == "eval.episodes") {
    cfg.eval.episodes = static_cast<int>(parse_int(key, value, 1, 100000));
  } else if (key == "eval.cadence") {
    cfg.eval.cadence = parse_int(key, value, 0, 1000000000L);
  } else if (key == "eval.stride") {
    cfg.eval.stride = static_cast<int>(parse_int(key, value, 1, 100000));
  } else if (key == "eval.coverage_grid") {
    cfg.eval.coverage_grid = static_cast<int>(parse_int(key, value, 1, 4096));
  }
  // io
  else if (key == "io.run_dir") {
    cfg.io.run_dir = value;
  } else if (key == "io.dataset_path") {
    cfg.io.dataset_path = value;
  } else if (key == "io.seed") {
    cfg.io.seed = parse_u64(key, value);
  } else {
    throw ConfigError("config error: unknown key \"" + key + "\"");
  }
}

RunConfig parse_config(const std::string& path,
                       const std::vector<std::string>& overrides) {
  RunConfig cfg = default_config();

  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path);
    std::string line;
    long line_no = 0;
    while (std::getline(f, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config error: " + path + ":" +
                          std::to_string(line_no) + ": expected key = value");
      apply_config_line(cfg, trim(line.substr(0, eq)),
                        trim(line.substr(eq + 1)));
    }
  }

  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config error: override \"" + ov +
                        "\": expected key=value");
    apply_config_line(cfg, trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
  }

  // Cross-field validation with key-level messages.
  if (cfg.gen.pause_max < cfg.gen.pause_min)
    throw ConfigError("config error: gen.pause_max < gen.pause_min");
  if (cfg.gen.segment_max < cfg.gen.segment_min)
    throw ConfigError("config error: gen.segment_max < gen.segment_min");
  try {
    cfg.agent.validate();
    resolve_env_spec(cfg.env);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }

  if (cfg.io.run_dir.empty()) {
    const char* env_dir = std::getenv("QC_RUN_DIR");
    cfg.io.run_dir = env_dir && *env_dir ? env_dir : "run";
  }
  return cfg;
}

namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::string render_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "agent.activation = "
      << (cfg.agent.activation == Activation::relu ? "relu" : "gelu") << "\n";
  out << "agent.alpha = " << fmt_real(cfg.agent.alpha) << "\n";
  out << "agent.batch = " << cfg.agent.batch << "\n";
  out << "agent.depth = " << cfg.agent.depth << "\n";
  out << "agent.flow_steps = " << cfg.agent.flow_steps << "\n";
  out << "agent.gamma = " << fmt_real(cfg.agent.gamma) << "\n";
  out << "agent.h = " << cfg.agent.h << "\n";
  out << "agent.k = " << cfg.agent.k << "\n";
  out << "agent.lr = " << fmt_real(cfg.agent.lr) << "\n";
  out << "agent.n_samples = " << cfg.agent.n_samples << "\n";
  out << "agent.offline_steps = " << cfg.agent.offline_steps << "\n";
  out << "agent.online_steps = " << cfg.agent.online_steps << "\n";
  out << "agent.tau = " << fmt_real(cfg.agent.tau) << "\n";
  out << "agent.utd = " << cfg.agent.utd << "\n";
  out << "agent.variant = " << to_string(cfg.agent.variant) << "\n";
  out << "agent.width = " << cfg.agent.width << "\n";
  out << "env.chain_states = " << cfg.env.chain_states << "\n";
  out << "env.episode_len = " << cfg.env.episode_len << "\n";
  out << "env.kind = " << to_string(cfg.env.kind) << "\n";
  out << "eval.cadence = " << cfg.eval.cadence << "\n";
  out << "eval.coverage_grid = " << cfg.eval.coverage_grid << "\n";
  out << "eval.episodes = " << cfg.eval.episodes << "\n";
  out << "eval.stride = " << cfg.eval.stride << "\n";
  out << "gen.action_noise = " << fmt_real(cfg.gen.action_noise) << "\n";
  out << "gen.num_transitions = " << cfg.gen_transitions << "\n";
  out << "gen.p_task = " << fmt_real(cfg.gen.p_task) << "\n";
  out << "gen.pause_max = " << cfg.gen.pause_max << "\n";
  out << "gen.pause_min = " << cfg.gen.pause_min << "\n";
  out << "gen.pause_prob = " << fmt_real(cfg.gen.pause_prob) << "\n";
  out << "gen.segment_max = " << cfg.gen.segment_max << "\n";
  out << "gen.segment_min = " << cfg.gen.segment_min << "\n";
  out << "gen.smoothing = " << fmt_real(cfg.gen.smoothing) << "\n";
  out << "io.dataset_path = " << cfg.io.dataset_path << "\n";
  out << "io.run_dir = " << cfg.io.run_dir << "\n";
  out << "io.seed = " << cfg.io.seed << "\n";
  return out.str();
}

}  // namespace qchunk
