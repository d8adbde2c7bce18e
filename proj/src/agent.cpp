#include "qchunk/agent.hpp"

#include <cmath>
#include <stdexcept>

namespace qchunk {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::qc: return "qc";
    case Variant::qc_fql: return "qc-fql";
    case Variant::bfn: return "bfn";
    case Variant::fql: return "fql";
    case Variant::bfn_n: return "bfn-n";
    case Variant::fql_n: return "fql-n";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "qc") return Variant::qc;
  if (s == "qc-fql") return Variant::qc_fql;
  if (s == "bfn") return Variant::bfn;
  if (s == "fql") return Variant::fql;
  if (s == "bfn-n") return Variant::bfn_n;
  if (s == "fql-n") return Variant::fql_n;
  throw std::invalid_argument("unknown variant: " + s);
}

void AgentConfig::validate() const {
  if (h < 1) throw std::invalid_argument("agent.h must be >= 1");
  if (n_samples < 1)
    throw std::invalid_argument("agent.n_samples must be >= 1");
  if (k < 1) throw std::invalid_argument("agent.k must be >= 1");
  if (alpha < 0.0) throw std::invalid_argument("agent.alpha must be >= 0");
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("agent.gamma must be in [0,1)");
  if (tau <= 0.0 || tau > 1.0)
    throw std::invalid_argument("agent.tau must be in (0,1]");
  if (lr <= 0.0) throw std::invalid_argument("agent.lr must be > 0");
  if (flow_steps < 1)
    throw std::invalid_argument("agent.flow_steps must be >= 1");
  if (batch < 1) throw std::invalid_argument("agent.batch must be >= 1");
  if (width < 1 || depth < 0)
    throw std::invalid_argument("agent network size invalid");
  if (offline_steps < 0 || online_steps < 0)
    throw std::invalid_argument("agent step budgets must be >= 0");
  if (utd < 1) throw std::invalid_argument("agent.utd must be >= 1");
  // The 1-step variants are the h = 1 degenerate points by definition.
  if ((variant == Variant::bfn || variant == Variant::fql) && h != 1)
    throw std::invalid_argument(to_string(variant) + " requires agent.h = 1");
}

namespace {

bool uses_actor(Variant v) {
  return v == Variant::qc_fql || v == Variant::fql || v == Variant::fql_n;
}

}  // namespace

Agent::Agent(const AgentConfig& cfg, int obs_dim, int act_dim,
             std::uint64_t seed)
    : cfg_(cfg), obs_dim_(obs_dim), act_dim_(act_dim) {
  cfg.validate();
  // QC / QC-FQL run everything on length-h chunks. The *-n variants keep
  // single-action networks but consume length-n sample windows.
  switch (cfg.variant) {
    case Variant::qc:
    case Variant::qc_fql:
      policy_h_ = cfg.h;
      sample_h_ = cfg.h;
      break;
    case Variant::bfn:
    case Variant::fql:
      policy_h_ = 1;
      sample_h_ = 1;
      break;
    case Variant::bfn_n:
    case Variant::fql_n:
      policy_h_ = 1;
      sample_h_ = cfg.h;
      break;
  }
  const int chunk_dim = act_dim * policy_h_;

  Rng init(derive_seed(seed, 0x1217));
  flow_ = FlowPolicy(obs_dim, chunk_dim, cfg.width, cfg.depth, cfg.flow_steps,
                     init, cfg.activation);
  critic_ = ChunkedCritic(obs_dim, act_dim, policy_h_, cfg.k, cfg.width,
                          cfg.depth, init, cfg.activation);
  if (uses_actor(cfg.variant))
    actor_.emplace(obs_dim, chunk_dim, cfg.width, cfg.depth, init,
                   cfg.activation);

  flow_opt_ = AdamState(flow_.net().param_count(), cfg.lr);
  for (const Mlp& m : critic_.members())
    critic_opts_.emplace_back(m.param_count(), cfg.lr);
  if (actor_) actor_opt_ = AdamState(actor_->net().param_count(), cfg.lr);
}

UpdateRecord Agent::update(const ReplayBuffer& buf, Rng& rng) {
  const ChunkBatch batch =
      buf.sample_chunk_batch(sample_h_, cfg_.gamma, cfg_.batch, rng);

  UpdateRecord rec;

  // Behavior flow update. The *-n variants model single actions, so they
  // train on the first action of each window.
  {
    const Matrix chunks =
        policy_h_ == sample_h_
            ? batch.a_chunk
            : Matrix(batch.a_chunk.leftCols(act_dim_));
    Vector grad = Vector::Zero(flow_.net().param_count());
    rec.flow_loss = flow_.bc_loss(batch.s, chunks, rng, grad);
    adam_step(flow_opt_, flow_.net().params(), grad);
  }

  // Critic update.
  {
    TdLoss td;
    switch (cfg_.variant) {
      case Variant::qc:
      case Variant::bfn:
        td = qc_td_loss(critic_, flow_, batch, cfg_.n_samples, rng);
        break;
      case Variant::qc_fql:
      case Variant::fql:
        td = fql_td_loss(critic_, *actor_, batch, rng);
        break;
      case Variant::bfn_n: {
        const BestOfNPolicy pick(flow_, critic_, cfg_.n_samples);
        td = nstep_td_loss(critic_, pick, batch, rng);
        break;
      }
      case Variant::fql_n: {
        // mu(s, z) as the single-step target policy.
        struct MuSampler final : ChunkSampler {
          explicit MuSampler(const NoisePolicy* p) : np(p) {}
          const NoisePolicy* np;
          int chunk_dim() const override { return np->chunk_dim(); }
          Matrix sample_chunks(const Matrix& s, Rng& r) const override {
            return np->sample(s, r);
          }
        };
        const MuSampler mu(&*actor_);
        td = nstep_td_loss(critic_, mu, batch, rng);
        break;
      }
    }
    rec.critic_loss = td.loss;
    for (int i = 0; i < critic_.ensemble_size(); ++i)
      adam_step(critic_opts_[i], critic_.members()[i].params(),
                td.member_grads[i]);
    critic_.ema_update_targets(cfg_.tau);
  }

  // Distillation actor update.
  if (actor_) {
    Vector grad = Vector::Zero(actor_->net().param_count());
    rec.actor_loss = distill_actor_loss(*actor_, flow_, critic_, batch.s,
                                        cfg_.alpha, rng, grad);
    adam_step(actor_opt_, actor_->net().params(), grad);
  }

  if (!std::isfinite(rec.critic_loss) || !std::isfinite(rec.flow_loss) ||
      !std::isfinite(rec.actor_loss))
    throw NumericError("non-finite training loss");
  return rec;
}

Vector Agent::sample_chunk(const Vector& obs, Rng& rng, bool eval) const {
  const Matrix s = obs.transpose();
  Matrix chunk;
  if (uses_actor(cfg_.variant)) {
    Matrix z = Matrix::Zero(1, actor_->chunk_dim());
    if (!eval) fill_normal(z, rng);
    chunk = actor_->act(s, z).cwiseMax(-1.0).cwiseMin(1.0);
  } else {
    const BestOfNPolicy pick(flow_, critic_, cfg_.n_samples);
    chunk = pick.sample_chunks(s, rng);
  }
  return chunk.row(0).transpose();
}

void Agent::begin_episode() {
  chunk_offset_ = 0;
  current_chunk_.resize(0);
}

Vector Agent::act(const Vector& obs, Rng& rng) {
  if (chunk_offset_ == 0 || current_chunk_.size() == 0)
    current_chunk_ = sample_chunk(obs, rng, /*eval=*/false);
  const Vector a = current_chunk_.segment(
      static_cast<Eigen::Index>(chunk_offset_) * act_dim_, act_dim_);
  chunk_offset_ = (chunk_offset_ + 1) % policy_h_;
  return a;
}

void AgentEvalPolicy::begin_episode(std::uint64_t seed) {
  rng_.emplace(seed);
  offset_ = 0;
  chunk_.resize(0);
}

Vector AgentEvalPolicy::act(const Vector& obs) {
  if (offset_ == 0 || chunk_.size() == 0)
    chunk_ = agent_->sample_chunk(obs, *rng_, /*eval=*/true);
  const int act_dim = agent_->act_dim();
  const Vector a =
      chunk_.segment(static_cast<Eigen::Index>(offset_) * act_dim, act_dim);
  offset_ = (offset_ + 1) % agent_->policy_h();
  return a;
}

void Agent::save(const std::string& path) const {
  std::vector<std::pair<std::string, const Vector*>> nets;
  nets.emplace_back("flow", &flow_.net().params());
  for (int i = 0; i < critic_.ensemble_size(); ++i) {
    nets.emplace_back("critic." + std::to_string(i),
                      &critic_.members()[i].params());
    nets.emplace_back("target." + std::to_string(i),
                      &critic_.targets()[i].params());
  }
  if (actor_) nets.emplace_back("actor", &actor_->net().params());
  save_checkpoint(path, nets);
}

void Agent::load(const std::string& path) {
  const auto nets = load_checkpoint(path);
  const auto find = [&](const std::string& name) -> const Vector& {
    for (const auto& [n, v] : nets)
      if (n == name) return v;
    throw std::runtime_error("checkpoint missing network: " + name);
  };
  const auto assign = [](Vector& dst, const Vector& src,
                         const std::string& name) {
    if (dst.size() != src.size())
      throw std::runtime_error("checkpoint size mismatch for " + name);
    dst = src;
  };
  assign(flow_.net().params(), find("flow"), "flow");
  for (int i = 0; i < critic_.ensemble_size(); ++i) {
    assign(critic_.members()[i].params(),
           find("critic." + std::to_string(i)), "critic");
    assign(critic_.targets()[i].params(),
           find("target." + std::to_string(i)), "target");
  }
  if (actor_) assign(actor_->net().params(), find("actor"), "actor");
}

namespace {

long resolve_cadence(long cadence, long steps) {
  if (cadence > 0) return cadence;
  return std::max(steps / 50, 1000L);
}

LogRow eval_row(Agent& agent, const EnvSpec& eval_env,
                const TrainOptions& opts, long step, const char* phase,
                long eval_index, const UpdateRecord& window,
                double coherency) {
  AgentEvalPolicy policy(agent);
  const EvalResult res =
      evaluate(policy, eval_env, opts.eval_episodes,
               derive_seed(opts.seed, 0xEE00 + eval_index), opts.stride);
  LogRow row;
  row.step = step;
  row.phase = phase;
  row.success_rate = res.success_rate;
  row.mean_return = res.mean_return;
  row.critic_loss = window.critic_loss;
  row.flow_loss = window.flow_loss;
  row.actor_loss = window.actor_loss;
  row.coherency = coherency;
  return row;
}

struct LossWindow {
  UpdateRecord sum;
  long count = 0;

  void add(const UpdateRecord& r) {
    sum.critic_loss += r.critic_loss;
    sum.flow_loss += r.flow_loss;
    sum.actor_loss += r.actor_loss;
    ++count;
  }
  UpdateRecord mean() const {
    UpdateRecord m;
    if (count > 0) {
      m.critic_loss = sum.critic_loss / count;
      m.flow_loss = sum.flow_loss / count;
      m.actor_loss = sum.actor_loss / count;
    }
    return m;
  }
  void reset() { *this = LossWindow(); }
};

}  // namespace

RunLog offline_pretrain(Agent& agent, const ReplayBuffer& buf,
                        const EnvSpec& eval_env, long steps,
                        const TrainOptions& opts) {
  RunLog log;
  Rng rng(derive_seed(opts.seed, 0x0FF1));
  const long cadence = resolve_cadence(opts.cadence, steps);
  long eval_index = 0;
  log.rows.push_back(eval_row(agent, eval_env, opts, 0, "offline",
                              eval_index++, UpdateRecord{}, 0.0));
  LossWindow window;
  for (long step = 1; step <= steps; ++step) {
    const UpdateRecord rec = agent.update(buf, rng);
    if (opts.update_trace) opts.update_trace->push_back(rec);
    window.add(rec);
    if (step % cadence == 0 || step == steps) {
      log.rows.push_back(eval_row(agent, eval_env, opts, step, "offline",
                                  eval_index++, window.mean(), 0.0));
      window.reset();
    }
  }
  return log;
}

RunLog online_finetune(Agent& agent, Env& env, ReplayBuffer& buf, long steps,
                       const TrainOptions& opts, Trace* exploration,
                       long step_offset) {
  RunLog log;
  Rng rng(derive_seed(opts.seed, 0x0A11));
  const long cadence = resolve_cadence(opts.cadence, steps);
  long eval_index = 1000;  // distinct eval seeds from the offline phase

  Trace local_trace;
  Trace* trace = exploration ? exploration : &local_trace;
  trace->stride = opts.stride;
  std::size_t window_start = trace->positions.size();

  long episode = 0;
  Vector obs = env.reset(derive_seed(opts.seed, 0xE9000 + episode));
  agent.begin_episode();
  trace->positions.push_back(env.position());

  LossWindow window;
  for (long step = 1; step <= steps; ++step) {
    const Vector a = agent.act(obs, rng);
    const StepResult res = env.step(a);
    Transition t;
    t.obs = obs;
    t.action = a;
    t.reward = res.reward;
    t.next_obs = res.obs;
    t.terminal = res.terminal;
    t.truncated = res.truncated;
    buf.append(t);
    obs = res.obs;
    if (step % opts.stride == 0) trace->positions.push_back(env.position());

    for (int u = 0; u < agent.config().utd; ++u) {
      const UpdateRecord rec = agent.update(buf, rng);
      if (opts.update_trace) opts.update_trace->push_back(rec);
      window.add(rec);
    }

    if (res.terminal || res.truncated) {
      ++episode;
      obs = env.reset(derive_seed(opts.seed, 0xE9000 + episode));
      agent.begin_episode();  // discard any unexecuted chunk remainder
    }

    if (step % cadence == 0 || step == steps) {
      Trace window_trace;
      window_trace.stride = opts.stride;
      window_trace.positions.assign(trace->positions.begin() + window_start,
                                    trace->positions.end());
      const double coherency = window_trace.positions.size() >= 2
                                   ? temporal_coherency(window_trace)
                                   : 0.0;
      window_start = trace->positions.size();
      log.rows.push_back(eval_row(agent, env.spec(), opts,
                                  step_offset + step, "online", eval_index++,
                                  window.mean(), coherency));
      window.reset();
    }
  }
  return log;
}

}  // namespace qchunk
