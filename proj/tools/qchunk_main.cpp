// One executable for data generation, training, evaluation, tabular oracle
// probes, and plotting. Exit codes: 0 success, 2 config error, 3 I/O error,
// 4 numeric failure during training.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qchunk/pipeline.hpp"

namespace {

int dispatch(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const qchunk::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const qchunk::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const qchunk::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline-to-online RL on chunked action spaces"};
  app.require_subcommand(1);

  std::string config_path, out_path, run_dir, checkpoint, log_path;
  std::vector<std::string> overrides;
  int probe_n = 3;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    cmd->add_option("--set", overrides,
                    "config overrides, e.g. --set agent.h=5");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "write a play-style dataset");
  add_common(gen);
  gen->add_option("--out", out_path, "output .qcd1 path")->required();

  CLI::App* train = app.add_subcommand("train", "offline phase then online phase");
  add_common(train);
  train->add_option("--data", out_path, "dataset .qcd1 path");
  train->add_option("--run-dir", run_dir, "run directory");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint .qckp path")
      ->required();

  CLI::App* oracle = app.add_subcommand(
      "oracle", "exact chain probes: bias table and fixed points");
  add_common(oracle);
  oracle->add_option("--n", probe_n, "backup length for the bias probe");
  oracle->add_option("--out-dir", run_dir, "output directory");

  CLI::App* plot = app.add_subcommand("plot", "learning-curve SVG from log.csv");
  plot->add_option("--log", log_path, "log.csv path")->required();
  plot->add_option("--out", out_path, "output .svg path")->required();

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    return dispatch([&] {
      qchunk::RunConfig cfg = qchunk::parse_config(config_path, overrides);
      qchunk::run_gen_data(cfg, out_path);
      std::printf("wrote %s\n", out_path.c_str());
    });
  }
  if (train->parsed()) {
    return dispatch([&] {
      qchunk::RunConfig cfg = qchunk::parse_config(config_path, overrides);
      if (!out_path.empty()) cfg.io.dataset_path = out_path;
      if (!run_dir.empty()) cfg.io.run_dir = run_dir;
      const qchunk::RunLog log = qchunk::run_train(cfg);
      const auto& last = log.rows.back();
      std::printf("done: step=%ld success_rate=%.4f\n", last.step,
                  last.success_rate);
    });
  }
  if (eval->parsed()) {
    return dispatch([&] {
      qchunk::RunConfig cfg = qchunk::parse_config(config_path, overrides);
      const qchunk::EvalSummary s = qchunk::run_eval(cfg, checkpoint);
      std::printf("success_rate=%.4f mean_return=%.3f coherency=%.6f\n",
                  s.success_rate, s.mean_return, s.coherency);
    });
  }
  if (oracle->parsed()) {
    return dispatch([&] {
      qchunk::RunConfig cfg = qchunk::parse_config(config_path, overrides);
      const std::string dir = run_dir.empty() ? cfg.io.run_dir : run_dir;
      const qchunk::OracleSummary s = qchunk::run_oracle(cfg, probe_n, dir);
      std::printf("n=%d max_abs_bias=%.12g\n", probe_n, s.max_abs_bias);
    });
  }
  if (plot->parsed()) {
    return dispatch([&] { qchunk::run_plot(log_path, out_path); });
  }
  return 1;
}
