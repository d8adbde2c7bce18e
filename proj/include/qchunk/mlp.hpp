#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qchunk/rng.hpp"
#include "qchunk/types.hpp"

namespace qchunk {

enum class Activation { gelu, relu };

// Cached forward-pass state needed by backward().
struct MlpTape {
  Matrix input;              // B x in
  std::vector<Matrix> pre;   // pre-activation per hidden layer, B x width
  std::vector<Matrix> post;  // activation per hidden layer, B x width
};

// Fully connected network with a linear output layer. Parameters live in
// one flat vector so the optimizer, target copies, finite-difference
// checks and checkpoints all operate on plain arrays.
class Mlp {
 public:
  Mlp() = default;
  // depth = number of hidden layers; depth 0 is a single linear map.
  Mlp(int in_dim, int out_dim, int width, int depth, Activation act,
      Rng& rng);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  Eigen::Index param_count() const { return params_.size(); }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  // x is B x in_dim; returns B x out_dim. Pass a tape to enable backward().
  Matrix forward(const Matrix& x, MlpTape* tape = nullptr) const;

  // grad_out = dL/dY for the tape's forward pass. Accumulates parameter
  // gradients into grad (size param_count, caller-zeroed) and returns dL/dX.
  Matrix backward(const MlpTape& tape, const Matrix& grad_out,
                  Vector& grad) const;

 private:
  struct Layer {
    int in = 0, out = 0;
    Eigen::Index w_off = 0, b_off = 0;
  };

  Eigen::Map<const Matrix> weight(const Layer& l) const {
    return {params_.data() + l.w_off, l.out, l.in};
  }
  Eigen::Map<const Vector> bias(const Layer& l) const {
    return {params_.data() + l.b_off, l.out};
  }

  int in_dim_ = 0, out_dim_ = 0;
  std::vector<Layer> layers_;
  Vector params_;
  Activation act_ = Activation::gelu;
};

struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;
  Vector m, v;

  AdamState() = default;
  AdamState(Eigen::Index n, double learning_rate);
};

// Bias-corrected adaptive-moment update, in place.
void adam_step(AdamState& st, Vector& params, const Vector& grad);

// target <- (1 - tau) * target + tau * online, elementwise.
void ema_update(Vector& target, const Vector& online, double tau);
void ema_update(Mlp& target, const Mlp& online, double tau);

struct FdReport {
  double max_rel_err = 0.0;
  int coords = 0;
  bool pass = false;
};

// Central-difference check of analytic_grad against loss_fn at the current
// params. loss_fn must be deterministic (re-seed any internal noise).
// Error metric per coordinate: |fd - an| / max(1, |fd|, |an|).
FdReport finite_difference_check(Vector& params,
                                 const std::function<double()>& loss_fn,
                                 const Vector& analytic_grad, int samples,
                                 double tol, Rng& rng, double step = 1e-6);

// Checkpoint file, little-endian: magic "QCKP", u32 version=1, u32 count,
// then per network: u32 name_len, name bytes, u32 param_count, f64 params.
void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, const Vector*>>& nets);
std::vector<std::pair<std::string, Vector>> load_checkpoint(
    const std::string& path);

}  // namespace qchunk
