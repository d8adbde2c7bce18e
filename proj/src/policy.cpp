#include "qchunk/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace qchunk {

FlowPolicy::FlowPolicy(int obs_dim, int chunk_dim, int width, int depth,
                       int flow_steps, Rng& rng, Activation act)
    : net_(obs_dim + chunk_dim + 1, chunk_dim, width, depth, act, rng),
      obs_dim_(obs_dim), chunk_dim_(chunk_dim), flow_steps_(flow_steps) {
  if (flow_steps < 1)
    throw std::invalid_argument("FlowPolicy: flow_steps must be >= 1");
}

Matrix FlowPolicy::velocity(const Matrix& s, const Matrix& m, double u,
                            MlpTape* tape) const {
  Matrix x(s.rows(), obs_dim_ + chunk_dim_ + 1);
  x.leftCols(obs_dim_) = s;
  x.middleCols(obs_dim_, chunk_dim_) = m;
  x.rightCols(1).setConstant(u);
  return net_.forward(x, tape);
}

double FlowPolicy::bc_loss(const Matrix& s, const Matrix& chunks, Rng& rng,
                           Vector& grad) const {
  const Eigen::Index m = s.rows();
  Vector u(m);
  for (Eigen::Index i = 0; i < m; ++i) u[i] = rng.uniform();
  Matrix z(m, chunk_dim_);
  fill_normal(z, rng);
  return bc_loss_with_noise(s, chunks, u, z, grad);
}

double FlowPolicy::bc_loss_with_noise(const Matrix& s, const Matrix& chunks,
                                      const Vector& u, const Matrix& z,
                                      Vector& grad) const {
  const Eigen::Index m = s.rows();
  if (chunks.rows() != m || chunks.cols() != chunk_dim_)
    throw std::invalid_argument("flow bc_loss: chunk shape mismatch");

  Matrix x(m, obs_dim_ + chunk_dim_ + 1);
  x.leftCols(obs_dim_) = s;
  x.middleCols(obs_dim_, chunk_dim_) =
      chunks.array().colwise() * u.array() +
      z.array().colwise() * (1.0 - u.array());
  x.rightCols(1) = u;

  MlpTape tape;
  Matrix pred = net_.forward(x, &tape);
  Matrix resid = pred - (chunks - z);
  const double loss = resid.squaredNorm() / static_cast<double>(m);
  net_.backward(tape, (2.0 / static_cast<double>(m)) * resid, grad);
  return loss;
}

Matrix FlowPolicy::ode_solve(const Matrix& s, const Matrix& z) const {
  // one input buffer for the whole integration; only m and u change
  Matrix x(s.rows(), obs_dim_ + chunk_dim_ + 1);
  x.leftCols(obs_dim_) = s;
  x.middleCols(obs_dim_, chunk_dim_) = z;
  const double dt = 1.0 / flow_steps_;
  for (int i = 1; i <= flow_steps_; ++i) {
    x.rightCols(1).setConstant(static_cast<double>(i - 1) / flow_steps_);
    x.middleCols(obs_dim_, chunk_dim_) += dt * net_.forward(x);
  }
  return x.middleCols(obs_dim_, chunk_dim_);
}

Matrix FlowPolicy::sample_chunks(const Matrix& states, Rng& rng) const {
  Matrix z(states.rows(), chunk_dim_);
  fill_normal(z, rng);
  return ode_solve(states, z).cwiseMax(-1.0).cwiseMin(1.0);
}

double kl_upper_bound(int n) {
  if (n < 1) throw std::invalid_argument("kl_upper_bound: n must be >= 1");
  return std::log(static_cast<double>(n)) -
         static_cast<double>(n - 1) / static_cast<double>(n);
}

BestOfNPolicy::BestOfNPolicy(const ChunkSampler& base, const QFunction& critic,
                             int n)
    : base_(&base), critic_(&critic), n_(n) {
  if (n < 1) throw std::invalid_argument("BestOfNPolicy: n must be >= 1");
}

Matrix BestOfNPolicy::sample_chunks(const Matrix& states, Rng& rng) const {
  const Eigen::Index m = states.rows();
  Matrix rep(m * n_, states.cols());
  for (Eigen::Index i = 0; i < m; ++i)
    rep.middleRows(i * n_, n_).rowwise() = states.row(i);

  const Matrix cand = base_->sample_chunks(rep, rng);
  const Vector q = critic_->mean_value(rep, cand, /*use_targets=*/false);

  Matrix out(m, cand.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index best = 0;
    double best_q = q[i * n_];
    for (int j = 1; j < n_; ++j) {
      const double v = q[i * n_ + j];
      if (v > best_q) {  // strict: ties keep the lowest index
        best_q = v;
        best = j;
      }
    }
    out.row(i) = cand.row(i * n_ + best);
  }
  return out;
}

NoisePolicy::NoisePolicy(int obs_dim, int chunk_dim, int width, int depth,
                         Rng& rng, Activation act)
    : net_(obs_dim + chunk_dim, chunk_dim, width, depth, act, rng),
      obs_dim_(obs_dim), chunk_dim_(chunk_dim) {}

Matrix NoisePolicy::act(const Matrix& s, const Matrix& z,
                        MlpTape* tape) const {
  if (z.rows() != s.rows() || z.cols() != chunk_dim_)
    throw std::invalid_argument("NoisePolicy::act: noise shape mismatch");
  Matrix x(s.rows(), obs_dim_ + chunk_dim_);
  x.leftCols(obs_dim_) = s;
  x.rightCols(chunk_dim_) = z;
  return net_.forward(x, tape);
}

Matrix NoisePolicy::sample(const Matrix& s, Rng& rng) const {
  Matrix z(s.rows(), chunk_dim_);
  fill_normal(z, rng);
  return act(s, z);
}

double distill_actor_loss(const NoisePolicy& np, const FlowPolicy& flow,
                          const QFunction& critic, const Matrix& s,
                          double alpha, Rng& rng, Vector& grad_psi) {
  Matrix z0(s.rows(), np.chunk_dim());
  fill_normal(z0, rng);
  return distill_actor_loss_with_noise(np, flow, critic, s, alpha, z0,
                                       grad_psi);
}

double distill_actor_loss_with_noise(const NoisePolicy& np,
                                     const FlowPolicy& flow,
                                     const QFunction& critic, const Matrix& s,
                                     double alpha, const Matrix& z0,
                                     Vector& grad_psi) {
  const double m = static_cast<double>(s.rows());

  MlpTape tape;
  const Matrix a_mu = np.act(s, z0, &tape);
  const Matrix z1 = flow.ode_solve(s, z0);  // constant w.r.t. psi

  const Matrix diff = a_mu - z1;
  const Vector q = critic.mean_value(s, a_mu, /*use_targets=*/false);
  const double loss = (alpha * diff.squaredNorm() - q.sum()) / m;

  Matrix d_a = (2.0 * alpha / m) * diff;
  d_a -= critic.mean_value_action_grad(s, a_mu) / m;

  // Backprop through mu only; [s|z] input gradients are discarded.
  np.net().backward(tape, d_a, grad_psi);
  return loss;
}

}  // namespace qchunk
