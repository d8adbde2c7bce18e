#include "qchunk/datagen.hpp"

#include <cmath>
#include <stdexcept>

namespace qchunk {

void PlayGenConfig::validate() const {
  if (pause_prob < 0.0 || pause_prob > 1.0)
    throw std::invalid_argument("gen.pause_prob must be in [0,1]");
  if (p_task < 0.0 || p_task > 1.0)
    throw std::invalid_argument("gen.p_task must be in [0,1]");
  if (segment_min < 1 || segment_max < segment_min)
    throw std::invalid_argument("gen.segment bounds invalid");
  if (pause_min < 1 || pause_max < pause_min)
    throw std::invalid_argument("gen.pause bounds invalid");
  if (action_noise < 0.0)
    throw std::invalid_argument("gen.action_noise must be >= 0");
  if (smoothing <= 0.0 || smoothing > 1.0)
    throw std::invalid_argument("gen.smoothing must be in (0,1]");
}

namespace {

enum class SegmentKind { task, random, pause };

struct Segment {
  SegmentKind kind = SegmentKind::task;
  int remaining = 0;
  Eigen::Vector2d waypoint{0, 0};  // point-blocks
  int chain_target = 0;            // discrete-chain random mode
};

Segment new_segment(const PlayGenConfig& gen, const EnvSpec& spec, Rng& rng) {
  Segment seg;
  if (rng.uniform() < gen.pause_prob) {
    seg.kind = SegmentKind::pause;
    seg.remaining =
        gen.pause_min + rng.uniform_int(gen.pause_max - gen.pause_min + 1);
    return seg;
  }
  seg.kind = rng.uniform() < gen.p_task ? SegmentKind::task
                                        : SegmentKind::random;
  seg.remaining = gen.segment_min +
                  rng.uniform_int(gen.segment_max - gen.segment_min + 1);
  if (seg.kind == SegmentKind::random) {
    if (spec.kind == EnvKind::point_blocks)
      seg.waypoint = {rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)};
    else
      seg.chain_target = rng.uniform_int(spec.chain_states);
  }
  return seg;
}

// Task waypoint for point-blocks, inferred from the observation alone:
// a carried block sits exactly at the agent position; a resting block
// within the goal radius of its target is delivered.
Eigen::Vector2d task_waypoint_blocks(const Vector& obs) {
  const Eigen::Vector2d p(obs[0], obs[1]);
  const Eigen::Vector2d b[2] = {{obs[4], obs[5]}, {obs[6], obs[7]}};
  int carried = -1;
  for (int i = 0; i < 2; ++i)
    if ((b[i] - p).norm() < 1e-9) carried = i;
  if (carried >= 0) return point_blocks_target(carried);

  double best = 1e9;
  Eigen::Vector2d wp = p;
  for (int i = 0; i < 2; ++i) {
    const bool delivered =
        (b[i] - point_blocks_target(i)).norm() <= PointBlocksParams::goal_radius;
    if (delivered) continue;
    const double d = (p - b[i]).norm();
    if (d < best) {
      best = d;
      wp = b[i];
    }
  }
  return wp;
}

Vector blocks_action(const Vector& obs, const Segment& seg,
                     const PlayGenConfig& gen, Vector& prev, Rng& rng) {
  if (seg.kind == SegmentKind::pause) {
    prev.setZero();
    return prev;
  }
  const Eigen::Vector2d p(obs[0], obs[1]);
  const Eigen::Vector2d vn(obs[2], obs[3]);
  const Eigen::Vector2d wp = seg.kind == SegmentKind::task
                                 ? task_waypoint_blocks(obs)
                                 : seg.waypoint;
  Eigen::Vector2d raw = 6.0 * (wp - p) - 1.5 * vn;
  Vector a(2);
  for (int i = 0; i < 2; ++i) {
    const double cmd = (1.0 - gen.smoothing) * prev[i] + gen.smoothing * raw[i];
    a[i] = std::clamp(cmd + gen.action_noise * rng.normal(), -1.0, 1.0);
  }
  prev = a;
  return a;
}

Vector chain_action(const Vector& obs, const Segment& seg,
                    const PlayGenConfig& gen, const EnvSpec& spec, Rng& rng) {
  Vector a(1);
  if (seg.kind == SegmentKind::pause) {
    a[0] = 0.0;  // exact zero, lands in the no-op bin
    return a;
  }
  const int s = spec.chain_states;
  int pos = 0;
  for (int i = 0; i < s; ++i)
    if (obs[i] > 0.5) pos = i;
  const bool flag = obs[s] > 0.5;

  int move;
  if (seg.kind == SegmentKind::task) {
    if (!flag) move = kChainToggle;
    else if (pos < s - 1) move = kChainRight;
    else move = kChainNoop;
  } else {
    if (pos < seg.chain_target) move = kChainRight;
    else if (pos > seg.chain_target) move = kChainLeft;
    else move = kChainNoop;
  }
  // Jitter stays inside the bin so the intended move survives binning.
  const double jitter =
      std::clamp(gen.action_noise * rng.normal(), -0.2, 0.2);
  a[0] = chain_bin_center(move) + jitter;
  return a;
}

}  // namespace

EpisodeDataset generate_play_dataset(const EnvSpec& raw_spec,
                                     const PlayGenConfig& gen,
                                     long num_transitions,
                                     std::uint64_t seed) {
  if (num_transitions <= 0)
    throw std::invalid_argument("num_transitions must be positive");
  gen.validate();
  const EnvSpec spec = resolve_env_spec(raw_spec);
  auto env = make_env(spec);
  ReplayBuffer buf(spec.obs_dim, spec.act_dim);
  Rng rng(derive_seed(seed, 0xDA7AULL));

  long episode = 0;
  while (buf.num_steps() < num_transitions) {
    Vector obs = env->reset(derive_seed(seed, 0x1000 + episode));
    Segment seg = new_segment(gen, spec, rng);
    Vector prev = Vector::Zero(spec.act_dim);
    bool done = false;
    while (!done) {
      if (seg.remaining <= 0) seg = new_segment(gen, spec, rng);
      seg.remaining -= 1;
      Vector a = spec.kind == EnvKind::point_blocks
                     ? blocks_action(obs, seg, gen, prev, rng)
                     : chain_action(obs, seg, gen, spec, rng);
      StepResult res = env->step(a);
      Transition t;
      t.obs = obs;
      t.action = a;
      t.reward = res.reward;
      t.next_obs = res.obs;
      t.terminal = res.terminal;
      t.truncated = res.truncated;
      buf.append(t);
      obs = res.obs;
      done = res.terminal || res.truncated;
      // Reaching the waypoint ends the segment early.
      if (!done && spec.kind == EnvKind::point_blocks &&
          seg.kind != SegmentKind::pause) {
        const Eigen::Vector2d p(obs[0], obs[1]);
        const Eigen::Vector2d wp = seg.kind == SegmentKind::task
                                       ? task_waypoint_blocks(obs)
                                       : seg.waypoint;
        if ((wp - p).norm() < 0.08) seg.remaining = 0;
      }
    }
    ++episode;
  }
  return buf.online();
}

}  // namespace qchunk
