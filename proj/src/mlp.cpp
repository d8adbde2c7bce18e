#include "qchunk/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace qchunk {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

void apply_act_inplace(Matrix& z, Activation act) {
  double* p = z.data();
  const Eigen::Index n = z.size();
  if (act == Activation::relu) {
    for (Eigen::Index i = 0; i < n; ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
  } else {
    for (Eigen::Index i = 0; i < n; ++i) p[i] = gelu(p[i]);
  }
}

Matrix act_grad(const Matrix& z, Activation act) {
  if (act == Activation::relu)
    return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
  return z.unaryExpr([](double v) { return gelu_grad(v); });
}

}  // namespace

Mlp::Mlp(int in_dim, int out_dim, int width, int depth, Activation act,
         Rng& rng)
    : in_dim_(in_dim), out_dim_(out_dim), act_(act) {
  if (in_dim <= 0 || out_dim <= 0 || depth < 0 || (depth > 0 && width <= 0))
    throw std::invalid_argument("Mlp: bad width schedule");

  Eigen::Index off = 0;
  int prev = in_dim;
  for (int l = 0; l <= depth; ++l) {
    const int out = (l == depth) ? out_dim : width;
    Layer layer;
    layer.in = prev;
    layer.out = out;
    layer.w_off = off;
    off += static_cast<Eigen::Index>(out) * prev;
    layer.b_off = off;
    off += out;
    layers_.push_back(layer);
    prev = out;
  }
  params_ = Vector::Zero(off);

  // Fan-in scaled uniform weights, zero biases.
  for (const Layer& l : layers_) {
    const double s = std::sqrt(3.0 / l.in);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(l.out) * l.in; ++i)
      params_[l.w_off + i] = rng.uniform(-s, s);
  }
}

Matrix Mlp::forward(const Matrix& x, MlpTape* tape) const {
  if (x.cols() != in_dim_)
    throw std::invalid_argument("Mlp::forward: input has " +
                                std::to_string(x.cols()) +
                                " columns, expected " +
                                std::to_string(in_dim_));
  if (tape) {
    tape->input = x;
    tape->pre.clear();
    tape->post.clear();
  }
  Matrix h;
  const Matrix* in = &x;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    Matrix z;
    z.noalias() = *in * weight(layers_[l]).transpose();
    z.rowwise() += bias(layers_[l]).transpose();
    if (tape) tape->pre.push_back(z);
    apply_act_inplace(z, act_);
    if (tape) tape->post.push_back(z);
    h = std::move(z);
    in = &h;
  }
  const Layer& last = layers_.back();
  Matrix out;
  out.noalias() = *in * weight(last).transpose();
  out.rowwise() += bias(last).transpose();
  return out;
}

Matrix Mlp::backward(const MlpTape& tape, const Matrix& grad_out,
                     Vector& grad) const {
  if (grad.size() != params_.size())
    throw std::invalid_argument("Mlp::backward: gradient size mismatch");

  const auto layer_input = [&](std::size_t l) -> const Matrix& {
    return l == 0 ? tape.input : tape.post[l - 1];
  };

  Matrix d = grad_out;  // dL/d(pre-activation) of the current layer
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& l = layers_[li];
    const Matrix& in = layer_input(li);
    Eigen::Map<Matrix> dw(grad.data() + l.w_off, l.out, l.in);
    Eigen::Map<Vector> db(grad.data() + l.b_off, l.out);
    dw.noalias() += d.transpose() * in;
    db.noalias() += d.colwise().sum().transpose();
    Matrix dx = d * weight(l);
    if (li > 0) d = dx.cwiseProduct(act_grad(tape.pre[li - 1], act_));
    else return dx;
  }
  return Matrix();  // unreachable for a non-empty net
}

AdamState::AdamState(Eigen::Index n, double learning_rate)
    : lr(learning_rate), m(Vector::Zero(n)), v(Vector::Zero(n)) {}

void adam_step(AdamState& st, Vector& params, const Vector& grad) {
  if (st.m.size() != params.size() || grad.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  st.step += 1;
  st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
  st.v = st.beta2 * st.v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  params -= (st.lr / c1) * st.m.cwiseQuotient(
                               ((st.v / c2).cwiseSqrt().array() + st.eps)
                                   .matrix());
}

void ema_update(Vector& target, const Vector& online, double tau) {
  target = (1.0 - tau) * target + tau * online;
}

void ema_update(Mlp& target, const Mlp& online, double tau) {
  ema_update(target.params(), online.params(), tau);
}

FdReport finite_difference_check(Vector& params,
                                 const std::function<double()>& loss_fn,
                                 const Vector& analytic_grad, int samples,
                                 double tol, Rng& rng, double step) {
  FdReport rep;
  const Eigen::Index n = params.size();
  const int count = samples < static_cast<int>(n) ? samples
                                                  : static_cast<int>(n);
  for (int i = 0; i < count; ++i) {
    const Eigen::Index idx =
        samples < static_cast<int>(n) ? rng.uniform_int(static_cast<int>(n))
                                      : i;
    const double saved = params[idx];
    params[idx] = saved + step;
    const double up = loss_fn();
    params[idx] = saved - step;
    const double down = loss_fn();
    params[idx] = saved;
    const double fd = (up - down) / (2.0 * step);
    const double an = analytic_grad[idx];
    const double denom = std::max({1.0, std::abs(fd), std::abs(an)});
    rep.max_rel_err = std::max(rep.max_rel_err, std::abs(fd - an) / denom);
    rep.coords += 1;
  }
  rep.pass = rep.max_rel_err < tol;
  return rep;
}

namespace {

void put_u32(std::ofstream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::ifstream& f, const std::string& path) {
  std::uint32_t v = 0;
  if (!f.read(reinterpret_cast<char*>(&v), 4))
    throw std::runtime_error("checkpoint truncated: " + path);
  return v;
}

}  // namespace

void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, const Vector*>>& nets) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f.write("QCKP", 4);
  put_u32(f, 1);
  put_u32(f, static_cast<std::uint32_t>(nets.size()));
  for (const auto& [name, vec] : nets) {
    put_u32(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(f, static_cast<std::uint32_t>(vec->size()));
    f.write(reinterpret_cast<const char*>(vec->data()),
            static_cast<std::streamsize>(vec->size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

std::vector<std::pair<std::string, Vector>> load_checkpoint(
    const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "QCKP", 4) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  const std::uint32_t version = get_u32(f, path);
  if (version != 1)
    throw std::runtime_error("unsupported checkpoint version: " + path);
  const std::uint32_t count = get_u32(f, path);
  std::vector<std::pair<std::string, Vector>> nets;
  nets.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(f, path);
    std::string name(name_len, '\0');
    if (!f.read(name.data(), name_len))
      throw std::runtime_error("checkpoint truncated: " + path);
    const std::uint32_t n = get_u32(f, path);
    Vector v(n);
    if (!f.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(n * sizeof(double))))
      throw std::runtime_error("checkpoint truncated: " + path);
    nets.emplace_back(std::move(name), std::move(v));
  }
  return nets;
}

}  // namespace qchunk
