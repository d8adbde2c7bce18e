#pragma once

#include <string>
#include <vector>

#include "qchunk/env.hpp"
#include "qchunk/rng.hpp"
#include "qchunk/types.hpp"

namespace qchunk {

struct Episode {
  Matrix obs;      // (len+1) x obs_dim
  Matrix actions;  // len x act_dim
  Vector rewards;  // len
  bool terminal = false;   // success at the final step
  bool truncated = false;  // hit the step limit

  int len() const { return static_cast<int>(actions.rows()); }
  void validate(int obs_dim, int act_dim) const;
};

struct EpisodeDataset {
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<Episode> episodes;

  long num_transitions() const;
};

struct DatasetStats {
  long num_transitions = 0;
  long num_episodes = 0;
  double success_fraction = 0.0;
  double mean_episode_len = 0.0;
};

DatasetStats dataset_stats(const EpisodeDataset& ds);

// QCD1 file, little-endian, no padding: magic "QCD1", u32 version=1,
// u32 obs_dim, u32 act_dim, u32 num_episodes; per episode: u32 len,
// u8 terminal, u8 truncated, f32 obs[(len+1)*obs_dim],
// f32 actions[len*act_dim], f32 rewards[len].
void save_dataset(const EpisodeDataset& ds, const std::string& path);
EpisodeDataset load_dataset(const std::string& path);

// Training tuple batch over length-h action chunks. Chunks never span
// episodes; rows whose episode ends before offset h carry a truncated
// reward sum, a shortened bootstrap discount and (for success endings)
// a zero bootstrap mask. Actions past the episode end are zero-padded and
// never contribute to losses.
struct ChunkBatch {
  Matrix s;        // M x obs_dim
  Matrix a_chunk;  // M x (act_dim * h)
  Vector r_sum;    // discounted in-chunk reward sum
  Matrix s_next;   // observation at the chunk end
  Vector bootstrap_mask;   // 0 iff success occurs inside the chunk
  Vector gamma_pow;        // gamma^steps_executed
  std::vector<int> chunk_len;  // executed steps per row, <= h
  int h = 1;
  int act_dim = 0;

  int rows() const { return static_cast<int>(s.rows()); }
};

// Offline dataset plus the growing online buffer. Single-writer; sampling
// reads only sealed episodes.
class ReplayBuffer {
 public:
  ReplayBuffer(int obs_dim, int act_dim);
  explicit ReplayBuffer(EpisodeDataset offline);

  // Appends to the open episode; seals it into online storage when the
  // transition is terminal or truncated.
  void append(const Transition& t);

  // M start indices drawn uniformly over all steps of all sealed episodes.
  ChunkBatch sample_chunk_batch(int h, double gamma, int m, Rng& rng) const;

  long num_steps() const { return total_steps_; }
  long num_episodes() const;
  const EpisodeDataset& offline() const { return base_; }
  const EpisodeDataset& online() const { return online_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  int open_episode_len() const { return static_cast<int>(open_actions_.size()); }

 private:
  const Episode& episode_at(std::size_t idx) const;
  void seal_open_episode(bool terminal, bool truncated);

  int obs_dim_ = 0, act_dim_ = 0;
  EpisodeDataset base_, online_;
  long total_steps_ = 0;
  std::vector<long> cum_steps_;  // cumulative step counts per sealed episode

  std::vector<Vector> open_obs_;
  std::vector<Vector> open_actions_;
  std::vector<double> open_rewards_;
};

// Fills one batch row for episode ep at start index t (shared between the
// sampler and tests that enumerate rows directly).
void fill_chunk_row(const Episode& ep, int t, int h, double gamma,
                    ChunkBatch& out, int row);

}  // namespace qchunk
