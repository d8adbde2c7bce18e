#include "qchunk/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "qchunk/datagen.hpp"
#include "qchunk/oracle.hpp"
#include "qchunk/pipeline.hpp"
#include "qchunk/replay.hpp"

namespace qchunk {

namespace fs = std::filesystem;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("write failed: " + path);
}

void write_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << "index";
  const Eigen::Index dims =
      trace.positions.empty() ? 0 : trace.positions.front().size();
  for (Eigen::Index d = 0; d < dims; ++d) f << ",p" << d;
  f << "\n";
  char buf[40];
  for (std::size_t i = 0; i < trace.positions.size(); ++i) {
    f << i;
    for (Eigen::Index d = 0; d < dims; ++d) {
      std::snprintf(buf, sizeof(buf), "%.9g", trace.positions[i][d]);
      f << ',' << buf;
    }
    f << "\n";
  }
}

}  // namespace

void run_gen_data(const RunConfig& cfg, const std::string& out_path) {
  const EpisodeDataset ds = generate_play_dataset(
      cfg.env, cfg.gen, cfg.gen_transitions, cfg.io.seed);
  save_dataset(ds, out_path);
}

RunLog run_train(const RunConfig& cfg) {
  if (cfg.io.dataset_path.empty())
    throw ConfigError("config error: io.dataset_path is required for train");
  if (!fs::exists(cfg.io.dataset_path))
    throw IoError("dataset not found: " + cfg.io.dataset_path);

  const EnvSpec spec = resolve_env_spec(cfg.env);
  EpisodeDataset ds = load_dataset(cfg.io.dataset_path);
  if (ds.obs_dim != spec.obs_dim || ds.act_dim != spec.act_dim)
    throw ConfigError("config error: dataset dims do not match env.kind");

  fs::create_directories(cfg.io.run_dir);
  write_text(cfg.io.run_dir + "/config.resolved", render_config(cfg));

  ReplayBuffer buf(std::move(ds));
  Agent agent(cfg.agent, spec.obs_dim, spec.act_dim,
              derive_seed(cfg.io.seed, 0xA6E7));

  TrainOptions opts;
  opts.eval_episodes = cfg.eval.episodes;
  opts.cadence = cfg.eval.cadence;
  opts.stride = cfg.eval.stride;
  opts.seed = cfg.io.seed;

  RunLog log = offline_pretrain(agent, buf, spec, cfg.agent.offline_steps,
                                opts);

  EnvSpec train_spec = spec;
  train_spec.seed = derive_seed(cfg.io.seed, 0x1E6);
  auto env = make_env(train_spec);
  Trace exploration;
  const RunLog online =
      online_finetune(agent, *env, buf, cfg.agent.online_steps, opts,
                      &exploration, cfg.agent.offline_steps);
  log.rows.insert(log.rows.end(), online.rows.begin(), online.rows.end());

  emit_csv(log, cfg.io.run_dir + "/log.csv");
  write_trace_csv(exploration, cfg.io.run_dir + "/trace.csv");
  agent.save(cfg.io.run_dir + "/checkpoint.qckp");
  run_plot(cfg.io.run_dir + "/log.csv", cfg.io.run_dir + "/curves.svg");
  return log;
}

EvalSummary run_eval(const RunConfig& cfg, const std::string& checkpoint) {
  if (!fs::exists(checkpoint))
    throw IoError("checkpoint not found: " + checkpoint);
  const EnvSpec spec = resolve_env_spec(cfg.env);
  Agent agent(cfg.agent, spec.obs_dim, spec.act_dim,
              derive_seed(cfg.io.seed, 0xA6E7));
  agent.load(checkpoint);

  AgentEvalPolicy policy(agent);
  const EvalResult res = evaluate(policy, spec, cfg.eval.episodes,
                                  derive_seed(cfg.io.seed, 0xE7A1),
                                  cfg.eval.stride);
  EvalSummary out;
  out.success_rate = res.success_rate;
  out.mean_return = res.mean_return;
  out.coherency =
      res.trace.positions.size() >= 2 ? temporal_coherency(res.trace) : 0.0;
  return out;
}

OracleSummary run_oracle(const RunConfig& cfg, int n,
                         const std::string& out_dir) {
  EnvSpec spec = cfg.env;
  spec.kind = EnvKind::discrete_chain;
  spec = resolve_env_spec(spec);
  const auto env = make_env(spec);
  const TabularMDP mdp = tabular_spec(*env, cfg.agent.gamma);

  const Matrix behavior = chain_behavior_policy(spec.chain_states);
  const Matrix target = chain_target_policy(spec.chain_states);
  const Matrix bias = nstep_bias_probe(mdp, behavior, target, n);

  fs::create_directories(out_dir);
  char buf[40];
  {
    std::ofstream f(out_dir + "/bias.csv", std::ios::binary);
    if (!f) throw IoError("cannot write bias.csv");
    f << "state,action,bias\n";
    for (int s = 0; s < mdp.num_states; ++s)
      for (int a = 0; a < mdp.num_actions; ++a) {
        std::snprintf(buf, sizeof(buf), "%.12g", bias(s, a));
        f << s << ',' << a << ',' << buf << "\n";
      }
  }
  for (const int h : {1, n}) {
    const ChunkedQTable q = chunk_value_iteration(mdp, h);
    std::ofstream f(out_dir + "/fixed_point_h" + std::to_string(h) + ".csv",
                    std::ios::binary);
    if (!f) throw IoError("cannot write fixed point csv");
    f << "state,chunk,value\n";
    for (int s = 0; s < mdp.num_states; ++s)
      for (Eigen::Index c = 0; c < q.values.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.12g", q.values(s, c));
        f << s << ',' << c << ',' << buf << "\n";
      }
  }
  OracleSummary out;
  out.max_abs_bias = bias.cwiseAbs().maxCoeff();
  return out;
}

void run_plot(const std::string& log_path, const std::string& out_svg) {
  if (!fs::exists(log_path)) throw IoError("log not found: " + log_path);
  const RunLog log = parse_csv(log_path);
  std::vector<Series> series(2);
  series[0].first = "success_rate";
  series[1].first = "coherency";
  for (const LogRow& r : log.rows) {
    series[0].second.emplace_back(static_cast<double>(r.step),
                                  r.success_rate);
    series[1].second.emplace_back(static_cast<double>(r.step), r.coherency);
  }
  emit_plot_svg(series, out_svg);
}

}  // namespace qchunk
