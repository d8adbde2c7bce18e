#include "qchunk/env.hpp"

#include <cmath>
#include <stdexcept>

namespace qchunk {

std::string to_string(EnvKind kind) {
  return kind == EnvKind::discrete_chain ? "discrete-chain" : "point-blocks";
}

EnvKind env_kind_from_string(const std::string& s) {
  if (s == "discrete-chain") return EnvKind::discrete_chain;
  if (s == "point-blocks") return EnvKind::point_blocks;
  throw std::invalid_argument("unsupported env kind: " + s);
}

StepResult Env::step(const Vector& action) {
  if (!started_) throw std::logic_error("Env::step before reset");
  if (done_) throw std::logic_error("Env::step after episode end");
  if (action.size() != spec_.act_dim)
    throw std::invalid_argument("Env::step: action dim mismatch");
  last_raw_action_ = action;
  Vector clipped = action.cwiseMax(-1.0).cwiseMin(1.0);
  steps_ += 1;
  StepResult r = step_impl(clipped);
  r.truncated = !r.terminal && steps_ >= spec_.episode_len;
  done_ = r.terminal || r.truncated;
  return r;
}

Eigen::Vector2d point_blocks_target(int block) {
  return block == 0 ? Eigen::Vector2d(0.75, 0.75)
                    : Eigen::Vector2d(-0.75, 0.75);
}

int chain_bin(double a) {
  int idx = static_cast<int>(std::floor((a + 1.0) / 0.5));
  if (idx < 0) idx = 0;
  if (idx > 3) idx = 3;
  return idx;
}

double chain_bin_center(int move) { return -0.75 + 0.5 * move; }

int chain_tabular_states(int positions) { return 2 * positions; }

int chain_state_index(int pos, bool flag, int positions) {
  return (flag ? positions : 0) + pos;
}

namespace {

// --- discrete chain ---------------------------------------------------------
// Positions 0..S-1 plus a latched goal flag. The binned moves are
// left/right/no-op/toggle; toggle latches the flag. Success (reward 0,
// terminal) requires standing on the last position with the flag set.
class DiscreteChainEnv final : public Env {
 public:
  explicit DiscreteChainEnv(const EnvSpec& spec) {
    spec_ = spec;
    s_ = spec.chain_states;
  }

  Vector reset(std::uint64_t) override {
    pos_ = 0;
    flag_ = false;
    steps_ = 0;
    done_ = false;
    started_ = true;
    return observe();
  }

  Vector position() const override {
    Vector p(1);
    p[0] = s_ > 1 ? 2.0 * pos_ / (s_ - 1) - 1.0 : 0.0;
    return p;
  }

  int pos() const { return pos_; }
  bool flag() const { return flag_; }

  void apply_move(int move) {
    switch (move) {
      case kChainLeft: pos_ = std::max(0, pos_ - 1); break;
      case kChainRight: pos_ = std::min(s_ - 1, pos_ + 1); break;
      case kChainNoop: break;
      case kChainToggle: flag_ = true; break;
      default: throw std::logic_error("bad chain move");
    }
  }

  bool success() const { return pos_ == s_ - 1 && flag_; }

 protected:
  StepResult step_impl(const Vector& a) override {
    apply_move(chain_bin(a[0]));
    StepResult r;
    r.terminal = success();
    r.reward = r.terminal ? 0.0 : -1.0;
    r.obs = observe();
    return r;
  }

 private:
  Vector observe() const {
    Vector o = Vector::Zero(s_ + 1);
    o[pos_] = 1.0;
    o[s_] = flag_ ? 1.0 : 0.0;
    return o;
  }

  int s_ = 6;
  int pos_ = 0;
  bool flag_ = false;
};

// --- point blocks -----------------------------------------------------------
// Velocity-damped point mass in [-1,1]^2 delivering two blocks to fixed
// targets. Touching an undelivered block attaches it; a carried block tracks
// the agent and is released (and counted delivered) once inside the goal
// radius of its target. Success when both blocks are delivered.
class PointBlocksEnv final : public Env {
 public:
  static constexpr double kAccel = PointBlocksParams::accel;
  static constexpr double kDamping = PointBlocksParams::damping;
  static constexpr double kMaxSpeed = PointBlocksParams::max_speed;
  static constexpr double kAttachRadius = PointBlocksParams::attach_radius;
  static constexpr double kGoalRadius = PointBlocksParams::goal_radius;

  explicit PointBlocksEnv(const EnvSpec& spec) { spec_ = spec; }

  Vector reset(std::uint64_t seed) override {
    Rng rng(derive_seed(spec_.seed, seed ^ 0x9d2c5680ULL));
    p_ = {rng.uniform(-0.5, 0.5), rng.uniform(-0.9, -0.6)};
    v_ = {0.0, 0.0};
    b_[0] = {rng.uniform(-0.85, -0.15), rng.uniform(-0.25, 0.25)};
    b_[1] = {rng.uniform(0.15, 0.85), rng.uniform(-0.25, 0.25)};
    carried_ = -1;
    delivered_[0] = delivered_[1] = false;
    steps_ = 0;
    done_ = false;
    started_ = true;
    return observe();
  }

  Vector position() const override {
    Vector p(2);
    p << p_[0], p_[1];
    return p;
  }

  static Eigen::Vector2d target(int i) { return point_blocks_target(i); }

  int carried() const { return carried_; }
  bool delivered(int i) const { return delivered_[i]; }
  Eigen::Vector2d block(int i) const { return b_[i]; }
  Eigen::Vector2d agent() const { return p_; }
  Eigen::Vector2d velocity() const { return v_; }

 protected:
  StepResult step_impl(const Vector& a) override {
    v_ = (1.0 - kDamping) * v_ + kAccel * Eigen::Vector2d(a[0], a[1]);
    p_ = (p_ + v_).cwiseMax(-1.0).cwiseMin(1.0);

    if (carried_ >= 0) {
      b_[carried_] = p_;
      if ((p_ - target(carried_)).norm() <= kGoalRadius) {
        delivered_[carried_] = true;
        carried_ = -1;
      }
    } else {
      double best = kAttachRadius;
      int pick = -1;
      for (int i = 0; i < 2; ++i) {
        if (delivered_[i]) continue;
        const double d = (p_ - b_[i]).norm();
        if (d <= best) {
          best = d;
          pick = i;
        }
      }
      carried_ = pick;
    }

    StepResult r;
    r.terminal = delivered_[0] && delivered_[1];
    r.reward = r.terminal ? 0.0 : -1.0;
    r.obs = observe();
    return r;
  }

 private:
  Vector observe() const {
    Vector o(8);
    const Eigen::Vector2d vn =
        (v_ / kMaxSpeed).cwiseMax(-1.0).cwiseMin(1.0);
    o << p_[0], p_[1], vn[0], vn[1], b_[0][0], b_[0][1], b_[1][0], b_[1][1];
    return o;
  }

  Eigen::Vector2d p_{0, 0}, v_{0, 0};
  Eigen::Vector2d b_[2]{{0, 0}, {0, 0}};
  int carried_ = -1;
  bool delivered_[2]{false, false};
};

}  // namespace

EnvSpec resolve_env_spec(EnvSpec spec) {
  if (spec.episode_len <= 0)
    throw std::invalid_argument("episode_len must be positive");
  switch (spec.kind) {
    case EnvKind::discrete_chain:
      if (spec.chain_states < 2)
        throw std::invalid_argument("chain_states must be >= 2");
      spec.obs_dim = spec.chain_states + 1;
      spec.act_dim = 1;
      break;
    case EnvKind::point_blocks:
      spec.obs_dim = 8;
      spec.act_dim = 2;
      break;
  }
  return spec;
}

std::unique_ptr<Env> make_env(const EnvSpec& raw) {
  const EnvSpec spec = resolve_env_spec(raw);
  switch (spec.kind) {
    case EnvKind::discrete_chain:
      return std::make_unique<DiscreteChainEnv>(spec);
    case EnvKind::point_blocks:
      return std::make_unique<PointBlocksEnv>(spec);
  }
  throw std::invalid_argument("unsupported env kind");
}

void TabularMDP::validate(double tol) const {
  for (int a = 0; a < num_actions; ++a) {
    for (int s = 0; s < num_states; ++s) {
      const double sum = transition[a].row(s).sum();
      if (std::abs(sum - 1.0) > tol)
        throw std::logic_error("transition row does not sum to 1");
    }
  }
  if (!reward.allFinite()) throw std::logic_error("non-finite reward table");
}

TabularMDP tabular_spec(const Env& env, double gamma) {
  if (env.spec().kind != EnvKind::discrete_chain)
    throw std::invalid_argument(
        "tabular_spec: only discrete-chain has an exact tabular form");
  const int positions = env.spec().chain_states;
  const int s_count = chain_tabular_states(positions);

  TabularMDP mdp;
  mdp.num_states = s_count;
  mdp.num_actions = 4;
  mdp.gamma = gamma;
  mdp.reward = Matrix::Constant(s_count, 4, -1.0);
  mdp.initial = Vector::Zero(s_count);
  mdp.initial[chain_state_index(0, false, positions)] = 1.0;
  mdp.absorbing.assign(s_count, 0);
  const int success = chain_state_index(positions - 1, true, positions);
  mdp.absorbing[success] = 1;
  for (int a = 0; a < 4; ++a)
    mdp.transition.push_back(Matrix::Zero(s_count, s_count));

  for (int flag = 0; flag < 2; ++flag) {
    for (int pos = 0; pos < positions; ++pos) {
      const int s = chain_state_index(pos, flag != 0, positions);
      for (int a = 0; a < 4; ++a) {
        if (s == success) {  // absorb with zero reward
          mdp.transition[a](s, s) = 1.0;
          mdp.reward(s, a) = 0.0;
          continue;
        }
        int npos = pos;
        bool nflag = flag != 0;
        switch (a) {
          case kChainLeft: npos = std::max(0, pos - 1); break;
          case kChainRight: npos = std::min(positions - 1, pos + 1); break;
          case kChainNoop: break;
          case kChainToggle: nflag = true; break;
        }
        const int ns = chain_state_index(npos, nflag, positions);
        mdp.transition[a](s, ns) = 1.0;
        if (ns == success) mdp.reward(s, a) = 0.0;
      }
    }
  }
  mdp.validate();
  return mdp;
}

}  // namespace qchunk
