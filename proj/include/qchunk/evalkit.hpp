#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qchunk/env.hpp"
#include "qchunk/types.hpp"

namespace qchunk {

// Agent positions sampled every `stride` steps.
struct Trace {
  std::vector<Vector> positions;
  int stride = 5;
};

// Mean L2 displacement between consecutive recorded positions. Small values
// indicate pauses or jittery back-and-forth motion.
double temporal_coherency(const Trace& trace);

// Number of distinct occupied grid cells, gridding [-1,1] per dimension.
long state_coverage(const Trace& trace, int grid_resolution);

struct LogRow {
  long step = 0;
  std::string phase;  // "offline" or "online"
  double success_rate = 0.0;
  double mean_return = 0.0;
  double critic_loss = 0.0;
  double flow_loss = 0.0;
  double actor_loss = 0.0;
  double coherency = 0.0;
};

struct RunLog {
  std::vector<LogRow> rows;
};

// CSV with the fixed header
// step,phase,success_rate,mean_return,critic_loss,flow_loss,actor_loss,coherency
// and deterministic float formatting.
void emit_csv(const RunLog& log, const std::string& path);
RunLog parse_csv(const std::string& path);

// Deterministic SVG 1.1 line plot, 800x500 viewbox, one polyline per series.
using Series = std::pair<std::string, std::vector<std::pair<double, double>>>;
void emit_plot_svg(const std::vector<Series>& series, const std::string& path);

// Episode-scoped acting interface used by evaluation rollouts; implemented
// by agents, and by scripted policies in tests.
class RolloutPolicy {
 public:
  virtual ~RolloutPolicy() = default;
  virtual void begin_episode(std::uint64_t seed) = 0;
  virtual Vector act(const Vector& obs) = 0;
};

struct EvalResult {
  double success_rate = 0.0;
  double mean_return = 0.0;
  Trace trace;
};

// Runs `episodes` independent episodes on fresh environment instances.
// Deterministic for a fixed (policy, spec, seed).
EvalResult evaluate(RolloutPolicy& policy, const EnvSpec& spec, int episodes,
                    std::uint64_t seed, int stride = 5);

double evaluate_success(RolloutPolicy& policy, const EnvSpec& spec,
                        int episodes, std::uint64_t seed);

}  // namespace qchunk
