#include "qchunk/critic.hpp"

#include <stdexcept>

namespace qchunk {

ChunkedCritic::ChunkedCritic(int obs_dim, int act_dim, int h, int k,
                             int width, int depth, Rng& rng, Activation act)
    : obs_dim_(obs_dim), act_dim_(act_dim), h_(h) {
  if (k < 1) throw std::invalid_argument("ChunkedCritic: k must be >= 1");
  if (h < 1) throw std::invalid_argument("ChunkedCritic: h must be >= 1");
  for (int i = 0; i < k; ++i)
    members_.emplace_back(obs_dim + act_dim * h, 1, width, depth, act, rng);
  targets_ = members_;
}

namespace {

Matrix join(const Matrix& s, const Matrix& a) {
  Matrix x(s.rows(), s.cols() + a.cols());
  x.leftCols(s.cols()) = s;
  x.rightCols(a.cols()) = a;
  return x;
}

}  // namespace

Vector ChunkedCritic::mean_value(const Matrix& s, const Matrix& a,
                                 bool use_targets) const {
  if (a.cols() != chunk_dim())
    throw std::invalid_argument("ChunkedCritic: chunk width mismatch");
  const Matrix x = join(s, a);
  const std::vector<Mlp>& nets = use_targets ? targets_ : members_;
  Vector out = Vector::Zero(s.rows());
  for (const Mlp& net : nets) out += net.forward(x).col(0);
  return out / static_cast<double>(nets.size());
}

Matrix ChunkedCritic::mean_value_action_grad(const Matrix& s,
                                             const Matrix& a) const {
  const Matrix x = join(s, a);
  const Matrix ones = Matrix::Ones(s.rows(), 1) /
                      static_cast<double>(members_.size());
  Matrix grad_a = Matrix::Zero(a.rows(), a.cols());
  for (const Mlp& net : members_) {
    MlpTape tape;
    net.forward(x, &tape);
    Vector scratch = Vector::Zero(net.param_count());
    Matrix gx = net.backward(tape, ones, scratch);
    grad_a += gx.rightCols(a.cols());
  }
  return grad_a;
}

void ChunkedCritic::ema_update_targets(double tau) {
  for (std::size_t i = 0; i < members_.size(); ++i)
    ema_update(targets_[i], members_[i], tau);
}

void ChunkedCritic::sync_targets() { targets_ = members_; }

Matrix masked_chunks(const ChunkBatch& batch) {
  Matrix a = batch.a_chunk;
  for (int r = 0; r < batch.rows(); ++r) {
    const Eigen::Index valid =
        static_cast<Eigen::Index>(batch.chunk_len[r]) * batch.act_dim;
    if (valid < a.cols()) a.row(r).tail(a.cols() - valid).setZero();
  }
  return a;
}

namespace {

// Shared backup: y = r_sum + mask * gamma_pow * mean target Q(s_next, a'),
// then mean squared residual over batch rows and ensemble members.
TdLoss td_loss_on_inputs(const ChunkedCritic& critic, const Matrix& s,
                         const Matrix& a_in, const ChunkBatch& batch,
                         const Matrix& next_actions_raw) {
  const Matrix a_next = next_actions_raw.cwiseMax(-1.0).cwiseMin(1.0);
  const Vector q_next = critic.mean_value(batch.s_next, a_next, true);
  const Vector y =
      batch.r_sum.array() +
      batch.bootstrap_mask.array() * batch.gamma_pow.array() *
          q_next.array();

  const Matrix x = [&] {
    Matrix m(s.rows(), s.cols() + a_in.cols());
    m.leftCols(s.cols()) = s;
    m.rightCols(a_in.cols()) = a_in;
    return m;
  }();

  const double mk = static_cast<double>(batch.rows()) *
                    static_cast<double>(critic.ensemble_size());
  TdLoss out;
  for (const Mlp& net : critic.members()) {
    MlpTape tape;
    Vector pred = net.forward(x, &tape).col(0);
    Vector resid = pred - y;
    out.loss += resid.squaredNorm() / mk;
    Vector grad = Vector::Zero(net.param_count());
    net.backward(tape, (2.0 / mk) * resid, grad);
    out.member_grads.push_back(std::move(grad));
  }
  return out;
}

}  // namespace

TdLoss qc_td_loss(const ChunkedCritic& critic, const ChunkSampler& behavior,
                  const ChunkBatch& batch, int n_best, Rng& rng) {
  if (batch.h != critic.h())
    throw std::invalid_argument("qc_td_loss: batch chunk length mismatch");
  const BestOfNPolicy pick(behavior, critic, n_best);
  const Matrix a_next = pick.sample_chunks(batch.s_next, rng);
  return td_loss_on_inputs(critic, batch.s, masked_chunks(batch), batch,
                           a_next);
}

TdLoss fql_td_loss(const ChunkedCritic& critic, const NoisePolicy& actor,
                   const ChunkBatch& batch, Rng& rng) {
  if (batch.h != critic.h())
    throw std::invalid_argument("fql_td_loss: batch chunk length mismatch");
  const Matrix a_next = actor.sample(batch.s_next, rng);
  return td_loss_on_inputs(critic, batch.s, masked_chunks(batch), batch,
                           a_next);
}

TdLoss nstep_td_loss(const ChunkedCritic& critic,
                     const ChunkSampler& target_policy,
                     const ChunkBatch& batch, Rng& rng) {
  if (critic.h() != 1)
    throw std::invalid_argument("nstep_td_loss: critic must have h == 1");
  if (target_policy.chunk_dim() != critic.act_dim())
    throw std::invalid_argument("nstep_td_loss: policy emits wrong width");
  const Matrix a_next = target_policy.sample_chunks(batch.s_next, rng);
  const Matrix a_first = batch.a_chunk.leftCols(batch.act_dim);
  return td_loss_on_inputs(critic, batch.s, a_first, batch, a_next);
}

TdLoss onestep_td_loss(const ChunkedCritic& critic,
                       const ChunkSampler& target_policy,
                       const ChunkBatch& batch, Rng& rng) {
  if (batch.h != 1)
    throw std::invalid_argument("onestep_td_loss: batch must have h == 1");
  return nstep_td_loss(critic, target_policy, batch, rng);
}

}  // namespace qchunk
