#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "qchunk/agent.hpp"
#include "qchunk/datagen.hpp"

using namespace qchunk;

namespace {

namespace fs = std::filesystem;

EnvSpec chain_spec(int states = 5, int episode_len = 40) {
  EnvSpec s;
  s.kind = EnvKind::discrete_chain;
  s.chain_states = states;
  s.episode_len = episode_len;
  return resolve_env_spec(s);
}

AgentConfig tiny_cfg(Variant v, int h) {
  AgentConfig cfg;
  cfg.variant = v;
  cfg.h = h;
  cfg.n_samples = 4;
  cfg.k = 2;
  cfg.alpha = 1.0;
  cfg.batch = 16;
  cfg.width = 16;
  cfg.depth = 1;
  cfg.flow_steps = 4;
  cfg.offline_steps = 0;
  cfg.online_steps = 0;
  return cfg;
}

ReplayBuffer chain_buffer(long transitions = 3000) {
  return ReplayBuffer(
      generate_play_dataset(chain_spec(), PlayGenConfig{}, transitions, 3));
}

}  // namespace

TEST_CASE("variant wiring") {
  const EnvSpec spec = chain_spec();

  Agent qc(tiny_cfg(Variant::qc, 3), spec.obs_dim, spec.act_dim, 1);
  CHECK(qc.actor() == nullptr);  // policy stays implicit
  CHECK(qc.critic().chunk_dim() == 3);
  CHECK(qc.policy_h() == 3);
  CHECK(qc.sample_h() == 3);

  Agent fql(tiny_cfg(Variant::fql, 1), spec.obs_dim, spec.act_dim, 1);
  CHECK(fql.actor() != nullptr);
  CHECK(fql.critic().chunk_dim() == 1);  // act_dim * 1

  AgentConfig qcf = tiny_cfg(Variant::qc_fql, 5);
  Agent qcfql(qcf, 8, 2, 1);
  CHECK(qcfql.critic().chunk_dim() == 10);  // A*h = 2*5
  CHECK(qcfql.actor()->chunk_dim() == 10);

  Agent bfn_n(tiny_cfg(Variant::bfn_n, 3), spec.obs_dim, spec.act_dim, 1);
  CHECK(bfn_n.policy_h() == 1);
  CHECK(bfn_n.sample_h() == 3);
  CHECK(bfn_n.critic().h() == 1);
}

TEST_CASE("invalid configurations are rejected") {
  AgentConfig cfg = tiny_cfg(Variant::qc, 3);
  cfg.n_samples = 0;
  CHECK_THROWS(cfg.validate());

  AgentConfig bfn = tiny_cfg(Variant::bfn, 3);  // bfn demands h = 1
  CHECK_THROWS(bfn.validate());

  AgentConfig neg = tiny_cfg(Variant::qc_fql, 2);
  neg.alpha = -0.5;
  CHECK_THROWS(neg.validate());
}

TEST_CASE("updates are deterministic across identical agents") {
  ReplayBuffer buf = chain_buffer();
  const EnvSpec spec = chain_spec();
  Agent a(tiny_cfg(Variant::qc, 3), spec.obs_dim, spec.act_dim, 7);
  Agent b(tiny_cfg(Variant::qc, 3), spec.obs_dim, spec.act_dim, 7);
  Rng ra(5), rb(5);
  for (int i = 0; i < 50; ++i) {
    const UpdateRecord ua = a.update(buf, ra);
    const UpdateRecord ub = b.update(buf, rb);
    CHECK(ua.critic_loss == ub.critic_loss);
    CHECK(ua.flow_loss == ub.flow_loss);
  }
  CHECK((a.flow().net().params() - b.flow().net().params())
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("degeneracy: qc(h=1) and bfn produce bitwise-identical updates") {
  ReplayBuffer buf = chain_buffer();
  const EnvSpec spec = chain_spec();
  Agent qc(tiny_cfg(Variant::qc, 1), spec.obs_dim, spec.act_dim, 11);
  Agent bfn(tiny_cfg(Variant::bfn, 1), spec.obs_dim, spec.act_dim, 11);
  Rng ra(13), rb(13);
  for (int i = 0; i < 300; ++i) {
    const UpdateRecord ua = qc.update(buf, ra);
    const UpdateRecord ub = bfn.update(buf, rb);
    CHECK(ua.critic_loss == ub.critic_loss);
    CHECK(ua.flow_loss == ub.flow_loss);
    CHECK(ua.actor_loss == ub.actor_loss);
  }
  CHECK((qc.critic().members()[0].params() -
         bfn.critic().members()[0].params())
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("degeneracy: qc-fql(h=1) and fql produce bitwise-identical updates") {
  ReplayBuffer buf = chain_buffer();
  const EnvSpec spec = chain_spec();
  Agent a(tiny_cfg(Variant::qc_fql, 1), spec.obs_dim, spec.act_dim, 17);
  Agent b(tiny_cfg(Variant::fql, 1), spec.obs_dim, spec.act_dim, 17);
  Rng ra(19), rb(19);
  for (int i = 0; i < 300; ++i) {
    const UpdateRecord ua = a.update(buf, ra);
    const UpdateRecord ub = b.update(buf, rb);
    CHECK(ua.critic_loss == ub.critic_loss);
    CHECK(ua.actor_loss == ub.actor_loss);
  }
  CHECK((a.actor()->net().params() - b.actor()->net().params())
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("open-loop execution follows the sampled chunk exactly") {
  const EnvSpec spec = chain_spec();
  Agent agent(tiny_cfg(Variant::qc, 3), spec.obs_dim, spec.act_dim, 23);
  auto env = make_env(spec);
  Vector obs = env->reset(1);
  agent.begin_episode();
  Rng rng(29);
  for (int cycle = 0; cycle < 4; ++cycle) {
    Rng preview = rng;  // copy captures the chunk the agent will draw
    const Vector chunk = agent.sample_chunk(obs, preview, false);
    for (int j = 0; j < 3; ++j) {
      const Vector a = agent.act(obs, rng);
      CHECK((a - chunk.segment(j, 1)).cwiseAbs().maxCoeff() == 0.0);
      const StepResult r = env->step(a);
      obs = r.obs;
      if (r.terminal || r.truncated) {
        obs = env->reset(cycle + 2);
        agent.begin_episode();
        break;
      }
    }
  }
}

TEST_CASE("offline pretraining never grows the buffer") {
  ReplayBuffer buf = chain_buffer(1500);
  const long episodes_before = buf.num_episodes();
  const long steps_before = buf.num_steps();
  const EnvSpec spec = chain_spec();
  Agent agent(tiny_cfg(Variant::qc, 2), spec.obs_dim, spec.act_dim, 31);
  TrainOptions opts;
  opts.eval_episodes = 2;
  opts.cadence = 50;
  opts.seed = 3;
  const RunLog log = offline_pretrain(agent, buf, spec, 100, opts);
  CHECK(buf.num_episodes() == episodes_before);
  CHECK(buf.num_steps() == steps_before);
  CHECK(log.rows.front().step == 0);
  CHECK(log.rows.back().step == 100);
  for (const LogRow& r : log.rows) CHECK(r.phase == "offline");
}

TEST_CASE("zero offline steps leaves only the initial evaluation") {
  ReplayBuffer buf = chain_buffer(1500);
  const EnvSpec spec = chain_spec();
  Agent agent(tiny_cfg(Variant::qc, 2), spec.obs_dim, spec.act_dim, 37);
  TrainOptions opts;
  opts.eval_episodes = 2;
  opts.seed = 3;
  const RunLog log = offline_pretrain(agent, buf, spec, 0, opts);
  CHECK(log.rows.size() == 1);
  CHECK(log.rows[0].step == 0);
}

TEST_CASE("online finetuning interacts, grows the buffer and logs in order") {
  ReplayBuffer buf = chain_buffer(1500);
  const EnvSpec spec = chain_spec();
  Agent agent(tiny_cfg(Variant::qc, 2), spec.obs_dim, spec.act_dim, 41);
  auto env = make_env(spec);
  TrainOptions opts;
  opts.eval_episodes = 2;
  opts.cadence = 40;
  opts.seed = 9;
  std::vector<UpdateRecord> trace_updates;
  opts.update_trace = &trace_updates;
  Trace exploration;
  const long steps_before = buf.num_steps();
  const RunLog log =
      online_finetune(agent, *env, buf, 120, opts, &exploration, 500);
  CHECK(buf.num_steps() >= steps_before);  // sealed episodes joined the pool
  CHECK(trace_updates.size() == 120);  // utd = 1
  long prev = -1;
  for (const LogRow& r : log.rows) {
    CHECK(r.phase == "online");
    CHECK(r.step > prev);
    prev = r.step;
  }
  CHECK(log.rows.back().step == 620);
  CHECK(exploration.positions.size() >= 120 / opts.stride);
}

TEST_CASE("online runs are deterministic per seed") {
  const EnvSpec spec = chain_spec();
  TrainOptions opts;
  opts.eval_episodes = 2;
  opts.cadence = 60;
  opts.seed = 77;

  const auto run_once = [&]() {
    ReplayBuffer buf = chain_buffer(1500);
    Agent agent(tiny_cfg(Variant::qc_fql, 2), spec.obs_dim, spec.act_dim, 43);
    auto env = make_env(spec);
    return online_finetune(agent, *env, buf, 120, opts);
  };
  const RunLog a = run_once();
  const RunLog b = run_once();
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].success_rate == b.rows[i].success_rate);
    CHECK(a.rows[i].mean_return == b.rows[i].mean_return);
    CHECK(a.rows[i].critic_loss == b.rows[i].critic_loss);
    CHECK(a.rows[i].coherency == b.rows[i].coherency);
  }
}

TEST_CASE("checkpoint save/load reproduces evaluation exactly") {
  ReplayBuffer buf = chain_buffer(1500);
  const EnvSpec spec = chain_spec();
  Agent agent(tiny_cfg(Variant::qc_fql, 2), spec.obs_dim, spec.act_dim, 47);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) agent.update(buf, rng);

  const std::string path =
      (fs::temp_directory_path() / "qc_agent.qckp").string();
  agent.save(path);

  Agent other(tiny_cfg(Variant::qc_fql, 2), spec.obs_dim, spec.act_dim, 48);
  other.load(path);

  AgentEvalPolicy pa(agent), pb(other);
  const EvalResult ra = evaluate(pa, spec, 10, 5);
  const EvalResult rb = evaluate(pb, spec, 10, 5);
  CHECK(ra.success_rate == rb.success_rate);
  CHECK(ra.mean_return == rb.mean_return);
  fs::remove(path);
}
