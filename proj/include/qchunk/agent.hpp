#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qchunk/critic.hpp"
#include "qchunk/evalkit.hpp"
#include "qchunk/policy.hpp"
#include "qchunk/replay.hpp"

namespace qchunk {

enum class Variant { qc, qc_fql, bfn, fql, bfn_n, fql_n };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct AgentConfig {
  Variant variant = Variant::qc;
  int h = 5;           // chunk length (n for the *-n variants)
  int n_samples = 32;  // best-of-N draws
  int k = 2;           // critic ensemble size
  double alpha = 100.0;
  double gamma = 0.99;
  double tau = 5e-3;
  double lr = 3e-4;
  int flow_steps = 10;
  int batch = 256;
  int width = 64;
  int depth = 2;
  Activation activation = Activation::gelu;
  long offline_steps = 50000;
  long online_steps = 50000;
  int utd = 1;

  void validate() const;
};

struct UpdateRecord {
  double critic_loss = 0.0;
  double flow_loss = 0.0;
  double actor_loss = 0.0;
};

// Raised when a training loss turns non-finite.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One algorithm variant: a behavior flow policy and a chunked critic, plus a
// one-step noise policy for the distillation-based variants. The chunked
// variants act open-loop over h-step chunks; the others resample every step.
class Agent {
 public:
  Agent(const AgentConfig& cfg, int obs_dim, int act_dim, std::uint64_t seed);

  const AgentConfig& config() const { return cfg_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  int policy_h() const { return policy_h_; }  // critic/policy chunk length
  int sample_h() const { return sample_h_; }  // batch chunk length
  bool has_actor() const { return actor_.has_value(); }

  FlowPolicy& flow() { return flow_; }
  const FlowPolicy& flow() const { return flow_; }
  ChunkedCritic& critic() { return critic_; }
  const ChunkedCritic& critic() const { return critic_; }
  NoisePolicy* actor() { return actor_ ? &*actor_ : nullptr; }
  const NoisePolicy* actor() const { return actor_ ? &*actor_ : nullptr; }

  // One training iteration: sample a batch, update flow, critic (+ EMA
  // targets) and, for the distillation variants, the actor.
  UpdateRecord update(const ReplayBuffer& buf, Rng& rng);

  // Open-loop acting for online interaction.
  void begin_episode();
  Vector act(const Vector& obs, Rng& rng);

  // Stateless chunk draw (used by acting and by the evaluation adapter).
  // eval = true applies the deterministic rule (z = 0) for noise policies.
  Vector sample_chunk(const Vector& obs, Rng& rng, bool eval) const;

  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  AgentConfig cfg_;
  int obs_dim_ = 0, act_dim_ = 0;
  int policy_h_ = 1, sample_h_ = 1;

  FlowPolicy flow_;
  ChunkedCritic critic_;
  std::optional<NoisePolicy> actor_;

  AdamState flow_opt_;
  std::vector<AdamState> critic_opts_;
  AdamState actor_opt_;

  Vector current_chunk_;
  int chunk_offset_ = 0;
};

// Evaluation adapter: deterministic per-episode behavior from a seed, no
// mutation of the agent's training state.
class AgentEvalPolicy : public RolloutPolicy {
 public:
  explicit AgentEvalPolicy(const Agent& agent) : agent_(&agent) {}
  void begin_episode(std::uint64_t seed) override;
  Vector act(const Vector& obs) override;

 private:
  const Agent* agent_;
  std::optional<Rng> rng_;
  Vector chunk_;
  int offset_ = 0;
};

struct TrainOptions {
  int eval_episodes = 50;
  long cadence = 0;  // 0 -> max(steps / 50, 1000)
  int stride = 5;
  std::uint64_t seed = 0;
  std::vector<UpdateRecord>* update_trace = nullptr;  // per-step losses
};

// Offline phase: `steps` update iterations over the (fixed) buffer contents.
// Periodic evaluations land in the returned log; the buffer is not grown and
// no training environment is stepped.
RunLog offline_pretrain(Agent& agent, const ReplayBuffer& buf,
                        const EnvSpec& eval_env, long steps,
                        const TrainOptions& opts);

// Online phase: one environment step per iteration (chunk-wise open-loop
// acting), each followed by `utd` update iterations over the growing buffer.
// Positions are recorded into `exploration` every opts.stride env steps.
RunLog online_finetune(Agent& agent, Env& env, ReplayBuffer& buf, long steps,
                       const TrainOptions& opts, Trace* exploration = nullptr,
                       long step_offset = 0);

}  // namespace qchunk
