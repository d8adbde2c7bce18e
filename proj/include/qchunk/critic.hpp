#pragma once

#include <vector>

#include "qchunk/mlp.hpp"
#include "qchunk/policy.hpp"
#include "qchunk/replay.hpp"
#include "qchunk/rng.hpp"
#include "qchunk/types.hpp"

namespace qchunk {

// Ensemble of K value networks over (state, action-chunk) pairs with delayed
// target copies. h = 1 recovers a standard single-action critic.
class ChunkedCritic : public QFunction {
 public:
  ChunkedCritic() = default;
  ChunkedCritic(int obs_dim, int act_dim, int h, int k, int width, int depth,
                Rng& rng, Activation act = Activation::gelu);

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  int h() const { return h_; }
  int chunk_dim() const { return act_dim_ * h_; }
  int ensemble_size() const { return static_cast<int>(members_.size()); }

  std::vector<Mlp>& members() { return members_; }
  const std::vector<Mlp>& members() const { return members_; }
  std::vector<Mlp>& targets() { return targets_; }
  const std::vector<Mlp>& targets() const { return targets_; }

  Vector mean_value(const Matrix& s, const Matrix& a,
                    bool use_targets) const override;
  Matrix mean_value_action_grad(const Matrix& s,
                                const Matrix& a) const override;

  void ema_update_targets(double tau);
  void sync_targets();  // hard copy, tau = 1

 private:
  int obs_dim_ = 0, act_dim_ = 0, h_ = 1;
  std::vector<Mlp> members_, targets_;
};

struct TdLoss {
  double loss = 0.0;
  std::vector<Vector> member_grads;  // dL/dtheta_k, one per online member
};

// Chunked TD loss with best-of-N targets sampled from the behavior sampler:
//   y = r_sum + mask * gamma_pow * mean_k' Qbar_k'(s_next, a*)
//   a* = argmax over N sampler draws of the online ensemble-mean Q.
// The target is gradient-detached; the loss is the mean over the batch and
// the ensemble of squared residuals.
TdLoss qc_td_loss(const ChunkedCritic& critic, const ChunkSampler& behavior,
                  const ChunkBatch& batch, int n_best, Rng& rng);

// Same backup with target actions from the one-step noise policy:
// a_next = mu(s_next, z), z ~ N(0, I); no gradient into psi.
TdLoss fql_td_loss(const ChunkedCritic& critic, const NoisePolicy& actor,
                   const ChunkBatch& batch, Rng& rng);

// Uncorrected n-step return loss for a single-action critic (h must be 1).
// The batch carries chunks of length n; the loss trains Q(s_t, a_t) on the
// first action toward y = r_sum + mask * gamma_pow * Qbar(s_next, a'),
// a' drawn from the given single-step policy at s_next.
TdLoss nstep_td_loss(const ChunkedCritic& critic,
                     const ChunkSampler& target_policy,
                     const ChunkBatch& batch, Rng& rng);

// Standard 1-step TD loss; requires a batch sampled with h = 1.
TdLoss onestep_td_loss(const ChunkedCritic& critic,
                       const ChunkSampler& target_policy,
                       const ChunkBatch& batch, Rng& rng);

// Chunk inputs with entries past each row's executed length zeroed, so loss
// values cannot depend on pad bytes.
Matrix masked_chunks(const ChunkBatch& batch);

}  // namespace qchunk
