#pragma once

#include <string>

#include "qchunk/config.hpp"
#include "qchunk/evalkit.hpp"

namespace qchunk {

// Writes a play-style dataset for the configured environment.
void run_gen_data(const RunConfig& cfg, const std::string& out_path);

// Offline phase then online phase; writes config.resolved, log.csv,
// curves.svg, trace.csv and checkpoint.qckp into io.run_dir.
RunLog run_train(const RunConfig& cfg);

struct EvalSummary {
  double success_rate = 0.0;
  double mean_return = 0.0;
  double coherency = 0.0;
};

// Rebuilds the configured agent, loads the checkpoint, evaluates.
EvalSummary run_eval(const RunConfig& cfg, const std::string& checkpoint);

struct OracleSummary {
  double max_abs_bias = 0.0;
};

// Chain bias probe and chunked fixed points; CSV artifacts in out_dir.
OracleSummary run_oracle(const RunConfig& cfg, int n,
                         const std::string& out_dir);

// Learning-curve SVG from a log.csv.
void run_plot(const std::string& log_path, const std::string& out_svg);

}  // namespace qchunk
