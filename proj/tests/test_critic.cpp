#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qchunk/critic.hpp"

using namespace qchunk;

namespace {

void set_constant_output(Mlp& net, double c) {
  net.params().setZero();
  net.params()[net.param_count() - 1] = c;  // output bias
}

ChunkBatch tiny_batch(int m, int obs_dim, int act_dim, int h, Rng& rng) {
  ChunkBatch b;
  b.h = h;
  b.act_dim = act_dim;
  b.s = Matrix(m, obs_dim);
  fill_normal(b.s, rng);
  b.a_chunk = Matrix(m, act_dim * h);
  fill_uniform(b.a_chunk, rng, -1.0, 1.0);
  b.s_next = Matrix(m, obs_dim);
  fill_normal(b.s_next, rng);
  b.r_sum = Vector(m);
  for (int i = 0; i < m; ++i) b.r_sum[i] = rng.uniform(-3.0, 0.0);
  b.bootstrap_mask = Vector::Ones(m);
  b.gamma_pow = Vector::Constant(m, std::pow(0.99, h));
  b.chunk_len.assign(m, h);
  return b;
}

struct ConstChunkStub final : ChunkSampler {
  ConstChunkStub(Vector chunk) : c(std::move(chunk)) {}
  Vector c;
  int chunk_dim() const override { return static_cast<int>(c.size()); }
  Matrix sample_chunks(const Matrix& s, Rng&) const override {
    Matrix out(s.rows(), c.size());
    out.rowwise() = c.transpose();
    return out;
  }
};

}  // namespace

TEST_CASE("q_mean over identical members equals any member") {
  Rng rng(1);
  ChunkedCritic critic(3, 2, 2, 3, 8, 1, rng);
  for (Mlp& m : critic.members()) m.params() = critic.members()[0].params();
  critic.sync_targets();
  Matrix s(4, 3), a(4, 4);
  fill_normal(s, rng);
  fill_uniform(a, rng, -1, 1);
  const Vector mean = critic.mean_value(s, a, false);
  Matrix x(4, 7);
  x << s, a;
  const Vector one = critic.members()[0].forward(x).col(0);
  CHECK((mean - one).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("q_mean of members outputting 1 and 3 is 2") {
  Rng rng(2);
  ChunkedCritic critic(3, 1, 2, 2, 8, 1, rng);
  set_constant_output(critic.members()[0], 1.0);
  set_constant_output(critic.members()[1], 3.0);
  Matrix s(5, 3), a(5, 2);
  fill_normal(s, rng);
  fill_uniform(a, rng, -1, 1);
  const Vector mean = critic.mean_value(s, a, false);
  for (int i = 0; i < 5; ++i) CHECK(mean[i] == doctest::Approx(2.0));
}

TEST_CASE("tau = 1 ema makes targets equal online members") {
  Rng rng(3);
  ChunkedCritic critic(3, 1, 1, 2, 8, 1, rng);
  Rng delta(4);
  for (Mlp& m : critic.members())
    for (Eigen::Index i = 0; i < m.param_count(); ++i)
      m.params()[i] += delta.normal();
  critic.ema_update_targets(1.0);
  Matrix s(4, 3), a(4, 1);
  fill_normal(s, rng);
  fill_uniform(a, rng, -1, 1);
  CHECK((critic.mean_value(s, a, true) - critic.mean_value(s, a, false))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("chunk width mismatch is rejected") {
  Rng rng(5);
  ChunkedCritic critic(3, 2, 2, 1, 8, 1, rng);
  CHECK_THROWS(critic.mean_value(Matrix::Zero(2, 3), Matrix::Zero(2, 3),
                                 false));
}

TEST_CASE("rows with bootstrap_mask = 0 have target exactly r_sum") {
  Rng rng(6);
  ChunkedCritic critic(3, 1, 2, 1, 8, 1, rng);
  ChunkBatch b = tiny_batch(8, 3, 1, 2, rng);
  b.bootstrap_mask.setZero();

  ConstChunkStub stub(Vector::Zero(2));
  Rng loss_rng(7);
  const TdLoss td = qc_td_loss(critic, stub, b, 4, loss_rng);

  // recompute by hand: y = r_sum
  Matrix x(8, 5);
  x << b.s, b.a_chunk;
  const Vector pred = critic.members()[0].forward(x).col(0);
  const double expect = (pred - b.r_sum).squaredNorm() / 8.0;
  CHECK(td.loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("terminal rows ignore gamma: gamma = 0 equals terminal target") {
  Rng rng(8);
  ChunkedCritic critic(2, 1, 1, 1, 8, 1, rng);
  ChunkBatch b = tiny_batch(4, 2, 1, 1, rng);
  b.gamma_pow.setZero();  // gamma = 0 batch
  ConstChunkStub stub(Vector::Zero(1));
  Rng r1(9), r2(9);
  const TdLoss a = onestep_td_loss(critic, stub, b, r1);
  b.bootstrap_mask.setZero();
  const TdLoss t = onestep_td_loss(critic, stub, b, r2);
  CHECK(a.loss == doctest::Approx(t.loss).epsilon(1e-15));
}

TEST_CASE("qc with N = 1 uses a plain sampler draw as the target action") {
  Rng rng(10);
  ChunkedCritic critic(3, 2, 1, 2, 8, 1, rng);
  ChunkBatch b = tiny_batch(6, 3, 2, 1, rng);

  struct CountingStub final : ChunkSampler {
    mutable Matrix last;
    int chunk_dim() const override { return 2; }
    Matrix sample_chunks(const Matrix& s, Rng& r) const override {
      Matrix z(s.rows(), 2);
      fill_uniform(z, r, -1.0, 1.0);
      last = z;
      return z;
    }
  } stub;

  Rng r1(11);
  const TdLoss td = qc_td_loss(critic, stub, b, 1, r1);
  // the sampler saw exactly the batch's next states, once per row
  CHECK(stub.last.rows() == 6);

  // recompute the same loss with the recorded actions
  const Vector q_next = critic.mean_value(b.s_next, stub.last, true);
  const Vector y = b.r_sum.array() +
                   b.bootstrap_mask.array() * b.gamma_pow.array() *
                       q_next.array();
  Matrix x(6, 5);
  x << b.s, b.a_chunk;
  double expect = 0.0;
  for (const Mlp& m : critic.members()) {
    const Vector pred = m.forward(x).col(0);
    expect += (pred - y).squaredNorm() / (6.0 * 2.0);
  }
  CHECK(td.loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("fql with a mu that mimics the stub gives identical targets") {
  Rng rng(12);
  ChunkedCritic critic(3, 2, 1, 2, 8, 1, rng);
  ChunkBatch b = tiny_batch(6, 3, 2, 1, rng);
  Vector c(2);
  c << 0.25, -0.5;

  // best-of-N over a constant sampler always returns c
  ConstChunkStub stub(c);
  Rng r1(13), r2(13);
  const TdLoss qc = qc_td_loss(critic, stub, b, 3, r1);

  // noise policy with zero weights and bias c outputs c for every z
  NoisePolicy np(3, 2, 0, 0, rng);
  np.net().params().setZero();
  np.net().params()[np.net().param_count() - 2] = c[0];
  np.net().params()[np.net().param_count() - 1] = c[1];
  const TdLoss fq = fql_td_loss(critic, np, b, r2);
  CHECK(qc.loss == doctest::Approx(fq.loss).epsilon(1e-14));
}

TEST_CASE("qc(h=1, N=1) equals onestep with the same sampler and stream") {
  Rng rng(14);
  ChunkedCritic critic(3, 2, 1, 2, 10, 1, rng);
  ChunkBatch b = tiny_batch(8, 3, 2, 1, rng);

  struct NoiseStub final : ChunkSampler {
    int chunk_dim() const override { return 2; }
    Matrix sample_chunks(const Matrix& s, Rng& r) const override {
      Matrix z(s.rows(), 2);
      fill_normal(z, r);
      return z;
    }
  } stub;

  Rng r1(15), r2(15);
  const TdLoss a = qc_td_loss(critic, stub, b, 1, r1);
  const TdLoss o = onestep_td_loss(critic, stub, b, r2);
  CHECK(a.loss == o.loss);
  for (int k = 0; k < 2; ++k)
    CHECK((a.member_grads[k] - o.member_grads[k]).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("nstep trains the first action of the window") {
  Rng rng(16);
  ChunkedCritic critic(3, 2, 1, 1, 8, 1, rng);
  ChunkBatch b = tiny_batch(5, 3, 2, 3, rng);  // n = 3 window
  ConstChunkStub stub(Vector::Zero(2));
  Rng r1(17);
  const TdLoss td = nstep_td_loss(critic, stub, b, r1);

  const Vector q_next =
      critic.mean_value(b.s_next, Matrix::Zero(5, 2), true);
  const Vector y = b.r_sum.array() +
                   b.bootstrap_mask.array() * b.gamma_pow.array() *
                       q_next.array();
  Matrix x(5, 5);
  x << b.s, b.a_chunk.leftCols(2);
  const Vector pred = critic.members()[0].forward(x).col(0);
  CHECK(td.loss ==
        doctest::Approx((pred - y).squaredNorm() / 5.0).epsilon(1e-12));
}

TEST_CASE("nstep requires a single-action critic") {
  Rng rng(18);
  ChunkedCritic critic(3, 2, 2, 1, 8, 1, rng);  // h = 2
  ChunkBatch b = tiny_batch(4, 3, 2, 2, rng);
  ConstChunkStub stub(Vector::Zero(2));
  Rng r(19);
  CHECK_THROWS(nstep_td_loss(critic, stub, b, r));
}

TEST_CASE("pad bytes never change the loss") {
  Rng rng(20);
  ChunkedCritic critic(3, 1, 3, 2, 8, 1, rng);
  ChunkBatch b = tiny_batch(6, 3, 1, 3, rng);
  // rows 0..2 end early (terminal at offset 2, truncated at 1 and 2)
  b.chunk_len[0] = 2;
  b.bootstrap_mask[0] = 0.0;
  b.chunk_len[1] = 1;
  b.chunk_len[2] = 2;
  for (int r = 0; r < 3; ++r)
    for (int j = b.chunk_len[r]; j < 3; ++j) b.a_chunk(r, j) = 0.0;

  ConstChunkStub stub(Vector::Zero(3));
  Rng r1(21), r2(21);
  const TdLoss before = qc_td_loss(critic, stub, b, 2, r1);
  // aggressive pad garbage
  for (int r = 0; r < 3; ++r)
    for (int j = b.chunk_len[r]; j < 3; ++j) b.a_chunk(r, j) = 123.0 + r + j;
  const TdLoss after = qc_td_loss(critic, stub, b, 2, r2);
  CHECK(before.loss == after.loss);
  for (int k = 0; k < 2; ++k)
    CHECK((before.member_grads[k] - after.member_grads[k])
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("perturbing targets changes the loss value but grads stay exact") {
  Rng rng(22);
  ChunkedCritic critic(3, 1, 2, 2, 8, 1, rng);
  ChunkBatch b = tiny_batch(6, 3, 1, 2, rng);
  ConstChunkStub stub(Vector::Constant(2, 0.1));

  Rng r1(23), r2(23);
  const TdLoss before = qc_td_loss(critic, stub, b, 2, r1);
  for (Mlp& t : critic.targets()) t.params().array() += 0.1;
  const TdLoss after = qc_td_loss(critic, stub, b, 2, r2);
  CHECK(before.loss != after.loss);

  // analytic grads still match finite differences over online params
  for (int k = 0; k < 2; ++k) {
    const auto loss_at = [&]() {
      Rng nr(23);
      return qc_td_loss(critic, stub, b, 2, nr).loss;
    };
    Rng pick(24 + k);
    const FdReport rep = finite_difference_check(
        critic.members()[k].params(), loss_at, after.member_grads[k], 64,
        1e-6, pick);
    CHECK(rep.pass);
  }
}

TEST_CASE("gradient checks for all four TD losses") {
  Rng rng(25);
  const int obs = 3, act = 2;

  SUBCASE("qc chunked") {
    ChunkedCritic critic(obs, act, 2, 2, 8, 1, rng);
    ChunkBatch b = tiny_batch(5, obs, act, 2, rng);
    FlowPolicy flow(obs, act * 2, 8, 1, 4, rng);
    for (int k = 0; k < 2; ++k) {
      const auto loss_at = [&]() {
        Rng nr(500);
        return qc_td_loss(critic, flow, b, 3, nr).loss;
      };
      Rng nr(500);
      const TdLoss td = qc_td_loss(critic, flow, b, 3, nr);
      Rng pick(26 + k);
      const FdReport rep = finite_difference_check(
          critic.members()[k].params(), loss_at, td.member_grads[k], 64,
          1e-6, pick);
      CHECK(rep.pass);
    }
  }

  SUBCASE("fql chunked") {
    ChunkedCritic critic(obs, act, 2, 2, 8, 1, rng);
    ChunkBatch b = tiny_batch(5, obs, act, 2, rng);
    NoisePolicy np(obs, act * 2, 8, 1, rng);
    for (int k = 0; k < 2; ++k) {
      const auto loss_at = [&]() {
        Rng nr(600);
        return fql_td_loss(critic, np, b, nr).loss;
      };
      Rng nr(600);
      const TdLoss td = fql_td_loss(critic, np, b, nr);
      Rng pick(28 + k);
      const FdReport rep = finite_difference_check(
          critic.members()[k].params(), loss_at, td.member_grads[k], 64,
          1e-6, pick);
      CHECK(rep.pass);
    }
  }

  SUBCASE("nstep and onestep") {
    ChunkedCritic critic(obs, act, 1, 2, 8, 1, rng);
    FlowPolicy flow(obs, act, 8, 1, 4, rng);
    for (const int n : {1, 3}) {
      ChunkBatch b = tiny_batch(5, obs, act, n, rng);
      for (int k = 0; k < 2; ++k) {
        const auto loss_at = [&]() {
          Rng nr(700);
          return nstep_td_loss(critic, flow, b, nr).loss;
        };
        Rng nr(700);
        const TdLoss td = nstep_td_loss(critic, flow, b, nr);
        Rng pick(30 + k + n);
        const FdReport rep = finite_difference_check(
            critic.members()[k].params(), loss_at, td.member_grads[k], 64,
            1e-6, pick);
        CHECK(rep.pass);
      }
    }
  }
}

TEST_CASE("duplicated ensemble members select like a single member") {
  Rng rng(32);
  ChunkedCritic one(3, 2, 1, 1, 8, 1, rng);
  ChunkedCritic dup(3, 2, 1, 3, 8, 1, rng);
  for (Mlp& m : dup.members()) m.params() = one.members()[0].params();
  dup.sync_targets();

  struct NoiseStub final : ChunkSampler {
    int chunk_dim() const override { return 2; }
    Matrix sample_chunks(const Matrix& s, Rng& r) const override {
      Matrix z(s.rows(), 2);
      fill_normal(z, r);
      return z;
    }
  } stub;
  Matrix s(10, 3);
  fill_normal(s, rng);
  BestOfNPolicy p1(stub, one, 5), p3(stub, dup, 5);
  Rng a(33), b(33);
  CHECK((p1.sample_chunks(s, a) - p3.sample_chunks(s, b))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}
