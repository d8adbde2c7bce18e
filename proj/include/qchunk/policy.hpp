#pragma once

#include "qchunk/mlp.hpp"
#include "qchunk/rng.hpp"
#include "qchunk/types.hpp"

namespace qchunk {

// Anything that can draw action chunks conditioned on a batch of states.
// Implemented by FlowPolicy and BestOfNPolicy; tests plug in stubs.
class ChunkSampler {
 public:
  virtual ~ChunkSampler() = default;
  virtual int chunk_dim() const = 0;
  // states: M x obs_dim -> M x chunk_dim.
  virtual Matrix sample_chunks(const Matrix& states, Rng& rng) const = 0;
};

// Ensemble-mean state/chunk value, with an action-gradient hook for actor
// losses. Implemented by ChunkedCritic; tests plug in analytic stubs.
class QFunction {
 public:
  virtual ~QFunction() = default;
  virtual Vector mean_value(const Matrix& s, const Matrix& a,
                            bool use_targets) const = 0;
  // d(mean value)/da per row, online ensemble.
  virtual Matrix mean_value_action_grad(const Matrix& s,
                                        const Matrix& a) const = 0;
};

// Behavior policy as a learned velocity field f(s, m, u) integrated from
// Gaussian noise with T Euler steps. Input layout is fixed as [s | m | u].
class FlowPolicy : public ChunkSampler {
 public:
  FlowPolicy() = default;
  FlowPolicy(int obs_dim, int chunk_dim, int width, int depth, int flow_steps,
             Rng& rng, Activation act = Activation::gelu);

  int obs_dim() const { return obs_dim_; }
  int chunk_dim() const override { return chunk_dim_; }
  int flow_steps() const { return flow_steps_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  // Velocity-field regression: || f(s, u*a + (1-u)*z, u) - (a - z) ||^2,
  // averaged over the batch. Returns the loss, accumulates dL/dparams.
  double bc_loss(const Matrix& s, const Matrix& chunks, Rng& rng,
                 Vector& grad) const;
  // Same with caller-supplied noise (test hook).
  double bc_loss_with_noise(const Matrix& s, const Matrix& chunks,
                            const Vector& u, const Matrix& z,
                            Vector& grad) const;

  // Euler integration from z at u=0 to u=1; unclipped.
  Matrix ode_solve(const Matrix& s, const Matrix& z) const;

  // z ~ N(0, I), integrate, clip into [-1,1].
  Matrix sample_chunks(const Matrix& states, Rng& rng) const override;

 private:
  Matrix velocity(const Matrix& s, const Matrix& m, double u,
                  MlpTape* tape = nullptr) const;

  Mlp net_;
  int obs_dim_ = 0, chunk_dim_ = 0, flow_steps_ = 1;
};

// Closed-form bound on KL(best-of-N || base): log N - (N-1)/N.
double kl_upper_bound(int n);

// Draws N chunks from the base sampler and keeps the one with the highest
// online ensemble-mean Q; ties go to the lowest sample index.
class BestOfNPolicy : public ChunkSampler {
 public:
  BestOfNPolicy(const ChunkSampler& base, const QFunction& critic, int n);

  int chunk_dim() const override { return base_->chunk_dim(); }
  Matrix sample_chunks(const Matrix& states, Rng& rng) const override;

 private:
  const ChunkSampler* base_;
  const QFunction* critic_;
  int n_;
};

// One-step noise-conditioned policy mu(s, z). Outputs are raw; callers clip
// at the environment boundary and when forming TD-target actions.
class NoisePolicy {
 public:
  NoisePolicy() = default;
  NoisePolicy(int obs_dim, int chunk_dim, int width, int depth, Rng& rng,
              Activation act = Activation::gelu);

  int obs_dim() const { return obs_dim_; }
  int chunk_dim() const { return chunk_dim_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  Matrix act(const Matrix& s, const Matrix& z, MlpTape* tape = nullptr) const;
  Matrix sample(const Matrix& s, Rng& rng) const;

 private:
  Mlp net_;
  int obs_dim_ = 0, chunk_dim_ = 0;
};

// Distillation actor loss:
//   mean over batch of  alpha * ||mu(s, z0) - z1||^2  -  Qbar(s, mu(s, z0))
// where z1 is the flow ODE solution from the same z0. Gradients flow into
// the noise policy only; the flow and the critic are held fixed.
double distill_actor_loss(const NoisePolicy& np, const FlowPolicy& flow,
                          const QFunction& critic, const Matrix& s,
                          double alpha, Rng& rng, Vector& grad_psi);
// Same with caller-supplied noise (test hook).
double distill_actor_loss_with_noise(const NoisePolicy& np,
                                     const FlowPolicy& flow,
                                     const QFunction& critic, const Matrix& s,
                                     double alpha, const Matrix& z0,
                                     Vector& grad_psi);

}  // namespace qchunk
