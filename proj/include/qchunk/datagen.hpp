#pragma once

#include <cstdint>

#include "qchunk/env.hpp"
#include "qchunk/replay.hpp"

namespace qchunk {

// Scripted "play-style" data generation: a waypoint controller that picks a
// sub-goal (task-directed or random), follows it with smoothed temporally
// correlated actions for a random segment length, and inserts zero-action
// pause segments. The resulting action distribution is history-dependent,
// which a Markovian policy cannot reproduce.
struct PlayGenConfig {
  double pause_prob = 0.25;   // chance a new segment is a pause
  int pause_min = 2;
  int pause_max = 8;
  int segment_min = 10;
  int segment_max = 40;
  double p_task = 0.65;       // non-pause segment heads for the task waypoint
  double action_noise = 0.1;  // Gaussian jitter on emitted actions
  double smoothing = 0.3;     // EMA weight on the fresh controller command

  void validate() const;
};

// Generates whole episodes until at least num_transitions steps are stored.
EpisodeDataset generate_play_dataset(const EnvSpec& spec,
                                     const PlayGenConfig& gen,
                                     long num_transitions,
                                     std::uint64_t seed);

}  // namespace qchunk
