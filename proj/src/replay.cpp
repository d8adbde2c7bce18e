#include "qchunk/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace qchunk {

void Episode::validate(int obs_dim, int act_dim) const {
  const int n = len();
  if (n < 1) throw std::logic_error("episode must have at least one step");
  if (obs.rows() != n + 1 || obs.cols() != obs_dim)
    throw std::logic_error("episode obs shape mismatch");
  if (actions.cols() != act_dim)
    throw std::logic_error("episode action shape mismatch");
  if (rewards.size() != n) throw std::logic_error("episode reward length");
  if (terminal && truncated)
    throw std::logic_error("episode cannot be both terminal and truncated");
  if (!obs.allFinite() || !actions.allFinite() || !rewards.allFinite())
    throw std::logic_error("non-finite episode data");
}

long EpisodeDataset::num_transitions() const {
  long n = 0;
  for (const Episode& e : episodes) n += e.len();
  return n;
}

DatasetStats dataset_stats(const EpisodeDataset& ds) {
  DatasetStats st;
  st.num_episodes = static_cast<long>(ds.episodes.size());
  long successes = 0;
  for (const Episode& e : ds.episodes) {
    st.num_transitions += e.len();
    if (e.terminal) ++successes;
  }
  if (st.num_episodes > 0) {
    st.success_fraction = static_cast<double>(successes) / st.num_episodes;
    st.mean_episode_len =
        static_cast<double>(st.num_transitions) / st.num_episodes;
  }
  return st;
}

// --- QCD1 I/O ----------------------------------------------------------------

namespace {

class Reader {
 public:
  Reader(const std::string& path) : f_(path, std::ios::binary), path_(path) {
    if (!f_) fail("cannot open file");
  }

  void raw(void* dst, std::size_t n) {
    if (!f_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n)))
      fail("truncated file");
    offset_ += n;
  }

  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }

  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("QCD1 format error in " + path_ + " at byte " +
                             std::to_string(offset_) + ": " + what);
  }

  std::size_t offset() const { return offset_; }

 private:
  std::ifstream f_;
  std::string path_;
  std::size_t offset_ = 0;
};

void write_f32_matrix(std::ofstream& f, const Matrix& m) {
  // Row-major element order.
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const float v = static_cast<float>(m(r, c));
      f.write(reinterpret_cast<const char*>(&v), 4);
    }
}

Matrix read_f32_matrix(Reader& in, Eigen::Index rows, Eigen::Index cols) {
  std::vector<float> buf(static_cast<std::size_t>(rows * cols));
  in.raw(buf.data(), buf.size() * 4);
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = buf[i++];
  return m;
}

}  // namespace

void save_dataset(const EpisodeDataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write dataset: " + path);
  const auto u32 = [&](std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
  };
  f.write("QCD1", 4);
  u32(1);
  u32(static_cast<std::uint32_t>(ds.obs_dim));
  u32(static_cast<std::uint32_t>(ds.act_dim));
  u32(static_cast<std::uint32_t>(ds.episodes.size()));
  for (const Episode& e : ds.episodes) {
    u32(static_cast<std::uint32_t>(e.len()));
    const std::uint8_t term = e.terminal ? 1 : 0, trunc = e.truncated ? 1 : 0;
    f.write(reinterpret_cast<const char*>(&term), 1);
    f.write(reinterpret_cast<const char*>(&trunc), 1);
    write_f32_matrix(f, e.obs);
    write_f32_matrix(f, e.actions);
    for (Eigen::Index i = 0; i < e.rewards.size(); ++i) {
      const float v = static_cast<float>(e.rewards[i]);
      f.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  if (!f) throw std::runtime_error("dataset write failed: " + path);
}

EpisodeDataset load_dataset(const std::string& path) {
  Reader in(path);
  char magic[4];
  in.raw(magic, 4);
  if (std::memcmp(magic, "QCD1", 4) != 0) in.fail("bad magic");
  const std::uint32_t version = in.u32();
  if (version != 1) in.fail("unsupported version " + std::to_string(version));
  EpisodeDataset ds;
  ds.obs_dim = static_cast<int>(in.u32());
  ds.act_dim = static_cast<int>(in.u32());
  if (ds.obs_dim <= 0 || ds.act_dim <= 0) in.fail("bad dimensions");
  const std::uint32_t n_eps = in.u32();
  ds.episodes.reserve(n_eps);
  for (std::uint32_t i = 0; i < n_eps; ++i) {
    Episode e;
    const std::uint32_t len = in.u32();
    if (len == 0) in.fail("zero-length episode");
    e.terminal = in.u8() != 0;
    e.truncated = in.u8() != 0;
    if (e.terminal && e.truncated) in.fail("episode both terminal and truncated");
    e.obs = read_f32_matrix(in, len + 1, ds.obs_dim);
    e.actions = read_f32_matrix(in, len, ds.act_dim);
    Vector rewards(len);
    for (std::uint32_t j = 0; j < len; ++j) {
      float v;
      in.raw(&v, 4);
      rewards[j] = v;
    }
    e.rewards = std::move(rewards);
    ds.episodes.push_back(std::move(e));
  }
  return ds;
}

// --- replay buffer -----------------------------------------------------------

ReplayBuffer::ReplayBuffer(int obs_dim, int act_dim)
    : obs_dim_(obs_dim), act_dim_(act_dim) {
  base_.obs_dim = online_.obs_dim = obs_dim;
  base_.act_dim = online_.act_dim = act_dim;
}

ReplayBuffer::ReplayBuffer(EpisodeDataset offline)
    : obs_dim_(offline.obs_dim), act_dim_(offline.act_dim),
      base_(std::move(offline)) {
  online_.obs_dim = obs_dim_;
  online_.act_dim = act_dim_;
  for (const Episode& e : base_.episodes) {
    e.validate(obs_dim_, act_dim_);
    total_steps_ += e.len();
    cum_steps_.push_back(total_steps_);
  }
}

long ReplayBuffer::num_episodes() const {
  return static_cast<long>(base_.episodes.size() + online_.episodes.size());
}

const Episode& ReplayBuffer::episode_at(std::size_t idx) const {
  return idx < base_.episodes.size()
             ? base_.episodes[idx]
             : online_.episodes[idx - base_.episodes.size()];
}

void ReplayBuffer::append(const Transition& t) {
  if (t.obs.size() != obs_dim_ || t.next_obs.size() != obs_dim_ ||
      t.action.size() != act_dim_)
    throw std::invalid_argument("ReplayBuffer::append: shape mismatch");
  open_obs_.push_back(t.obs);
  open_actions_.push_back(t.action);
  open_rewards_.push_back(t.reward);
  if (t.terminal || t.truncated) {
    open_obs_.push_back(t.next_obs);
    seal_open_episode(t.terminal, t.truncated);
  }
}

void ReplayBuffer::seal_open_episode(bool terminal, bool truncated) {
  const int len = static_cast<int>(open_actions_.size());
  Episode e;
  e.terminal = terminal;
  e.truncated = truncated;
  e.obs = Matrix(len + 1, obs_dim_);
  for (int i = 0; i <= len; ++i) e.obs.row(i) = open_obs_[i].transpose();
  e.actions = Matrix(len, act_dim_);
  e.rewards = Vector(len);
  for (int i = 0; i < len; ++i) {
    e.actions.row(i) = open_actions_[i].transpose();
    e.rewards[i] = open_rewards_[i];
  }
  e.validate(obs_dim_, act_dim_);
  online_.episodes.push_back(std::move(e));
  total_steps_ += len;
  cum_steps_.push_back(total_steps_);
  open_obs_.clear();
  open_actions_.clear();
  open_rewards_.clear();
}

void fill_chunk_row(const Episode& ep, int t, int h, double gamma,
                    ChunkBatch& out, int row) {
  const int len = ep.len();
  const int act_dim = out.act_dim;
  const int steps = std::min(h, len - t);

  out.s.row(row) = ep.obs.row(t);
  out.a_chunk.row(row).setZero();
  double r_sum = 0.0, g = 1.0;
  for (int j = 0; j < steps; ++j) {
    out.a_chunk.row(row).segment(static_cast<Eigen::Index>(j) * act_dim,
                                 act_dim) = ep.actions.row(t + j);
    r_sum += g * ep.rewards[t + j];
    g *= gamma;
  }
  out.r_sum[row] = r_sum;
  out.s_next.row(row) = ep.obs.row(t + steps);
  const bool success_inside = ep.terminal && (t + steps == len);
  out.bootstrap_mask[row] = success_inside ? 0.0 : 1.0;
  out.gamma_pow[row] = g;  // gamma^steps
  out.chunk_len[row] = steps;
}

ChunkBatch ReplayBuffer::sample_chunk_batch(int h, double gamma, int m,
                                            Rng& rng) const {
  if (h < 1) throw std::invalid_argument("sample_chunk_batch: h must be >= 1");
  if (total_steps_ == 0)
    throw std::logic_error("sample_chunk_batch: no sealed episodes");

  ChunkBatch b;
  b.h = h;
  b.act_dim = act_dim_;
  b.s = Matrix(m, obs_dim_);
  b.a_chunk = Matrix(m, static_cast<Eigen::Index>(act_dim_) * h);
  b.r_sum = Vector(m);
  b.s_next = Matrix(m, obs_dim_);
  b.bootstrap_mask = Vector(m);
  b.gamma_pow = Vector(m);
  b.chunk_len.assign(m, 0);

  for (int row = 0; row < m; ++row) {
    // Uniform over global step indices == uniform over valid (episode, t).
    const long idx = rng.uniform_long(total_steps_);
    const auto it =
        std::upper_bound(cum_steps_.begin(), cum_steps_.end(), idx);
    const std::size_t ep_idx =
        static_cast<std::size_t>(it - cum_steps_.begin());
    const long prev = ep_idx == 0 ? 0 : cum_steps_[ep_idx - 1];
    const int t = static_cast<int>(idx - prev);
    fill_chunk_row(episode_at(ep_idx), t, h, gamma, b, row);
  }
  return b;
}

}  // namespace qchunk
