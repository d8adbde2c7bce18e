#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qchunk/rng.hpp"
#include "qchunk/types.hpp"

namespace qchunk {

enum class EnvKind { discrete_chain, point_blocks };

std::string to_string(EnvKind kind);
EnvKind env_kind_from_string(const std::string& s);

struct EnvSpec {
  EnvKind kind = EnvKind::point_blocks;
  int obs_dim = 8;   // derived from kind by make_env
  int act_dim = 2;   // derived from kind by make_env
  int episode_len = 200;
  std::uint64_t seed = 0;
  int chain_states = 6;  // discrete-chain only
};

struct StepResult {
  Vector obs;
  double reward = -1.0;
  bool terminal = false;
  bool truncated = false;
};

struct Transition {
  Vector obs;
  Vector action;
  double reward = -1.0;
  Vector next_obs;
  bool terminal = false;
  bool truncated = false;
};

// Stateful episodic environment. Instances are single-owner; run independent
// instances for concurrent evaluation. Rewards are -1 per step and 0 on the
// success step, which also terminates the episode. Hitting episode_len
// without success truncates (terminal stays false).
class Env {
 public:
  virtual ~Env() = default;

  const EnvSpec& spec() const { return spec_; }

  // Deterministic: the same seed reproduces the same initial state.
  virtual Vector reset(std::uint64_t seed) = 0;

  // Clips the action into [-1,1]^A internally; the raw action is kept for
  // inspection. Stepping a finished episode is a usage error.
  StepResult step(const Vector& action);

  // Low-dimensional agent position used by exploration traces.
  virtual Vector position() const = 0;

  const Vector& last_raw_action() const { return last_raw_action_; }
  int steps_taken() const { return steps_; }

 protected:
  virtual StepResult step_impl(const Vector& clipped) = 0;

  EnvSpec spec_;
  Vector last_raw_action_;
  int steps_ = 0;
  bool done_ = false;
  bool started_ = false;
};

std::unique_ptr<Env> make_env(const EnvSpec& spec);

// Resolves the derived observation/action dimensions for a kind without
// instantiating the environment.
EnvSpec resolve_env_spec(EnvSpec spec);

// --- point-blocks geometry ---------------------------------------------------
// Shared by the environment, the scripted data generator and tests.
struct PointBlocksParams {
  static constexpr double accel = 0.01;
  static constexpr double damping = 0.08;
  static constexpr double max_speed = accel / damping;
  static constexpr double attach_radius = 0.12;
  static constexpr double goal_radius = 0.12;
};

Eigen::Vector2d point_blocks_target(int block);

// --- discrete-chain action binning -----------------------------------------
// The chain exposes a 1-D continuous action in [-1,1] that is binned into
// four moves. Bin centers are what scripted data generators emit.
enum ChainMove { kChainLeft = 0, kChainRight = 1, kChainNoop = 2,
                 kChainToggle = 3 };

int chain_bin(double a);
double chain_bin_center(int move);

// Number of tabular states for a chain with n positions (position x flag).
int chain_tabular_states(int positions);
int chain_state_index(int pos, bool flag, int positions);

// --- exact tabular form -----------------------------------------------------
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  std::vector<Matrix> transition;  // per action: S x S, rows are distributions
  Matrix reward;                   // S x A
  Vector initial;                  // distribution over S
  double gamma = 0.99;
  std::vector<std::uint8_t> absorbing;  // success states, value 0

  // Row sums within tol of 1, finite rewards.
  void validate(double tol = 1e-12) const;
};

// Exact transition/reward tables for the discrete chain. The success state
// absorbs with reward 0, matching the environment's termination semantics.
// Throws for environments without a tractable tabular form.
TabularMDP tabular_spec(const Env& env, double gamma = 0.99);

}  // namespace qchunk
