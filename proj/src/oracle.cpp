#include "qchunk/oracle.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace qchunk {

long chunk_count(int num_actions, int h) {
  long count = 1;
  for (int i = 0; i < h; ++i) {
    count *= num_actions;
    if (count > 100'000'000L)
      throw std::invalid_argument("chunk space too large");
  }
  return count;
}

std::vector<int> decode_chunk(long idx, int num_actions, int h) {
  std::vector<int> actions(h);
  for (int j = 0; j < h; ++j) {
    actions[j] = static_cast<int>(idx % num_actions);
    idx /= num_actions;
  }
  return actions;
}

long encode_chunk(const std::vector<int>& actions, int num_actions) {
  long idx = 0;
  for (std::size_t j = actions.size(); j-- > 0;)
    idx = idx * num_actions + actions[j];
  return idx;
}

namespace {

void check_size_guard(const TabularMDP& mdp, int h) {
  const long entries = mdp.num_states * chunk_count(mdp.num_actions, h);
  if (entries > 10'000'000L)
    throw std::invalid_argument("chunked table exceeds the 1e7 entry guard");
}

void check_policy(const Matrix& policy, int rows, long cols,
                  const char* what) {
  if (policy.rows() != rows || policy.cols() != cols)
    throw std::invalid_argument(std::string(what) + ": policy shape");
  for (int s = 0; s < rows; ++s)
    if (std::abs(policy.row(s).sum() - 1.0) > 1e-9 ||
        policy.row(s).minCoeff() < -1e-15)
      throw std::invalid_argument(std::string(what) +
                                  ": rows must be distributions");
}

// One sweep of the chunked backup given the bootstrap state values w:
//   Q(s, a_0 + A * rest) = r(s, a_0) + gamma * T[a_0] * Q_{rest}(:, rest)
// built level by level over chunk suffixes; level 0 is w itself.
Matrix chunk_backup_sweep(const TabularMDP& mdp, int h, const Vector& w) {
  const int a_count = mdp.num_actions;
  Matrix level = w;  // S x A^0
  for (int length = 1; length <= h; ++length) {
    const long cols = chunk_count(a_count, length);
    Matrix next(mdp.num_states, cols);
    for (long rest = 0; rest < cols / a_count; ++rest) {
      const Vector follow = mdp.gamma * (level.col(rest));
      for (int a0 = 0; a0 < a_count; ++a0)
        next.col(rest * a_count + a0) =
            mdp.reward.col(a0) + mdp.transition[a0] * follow;
    }
    level = std::move(next);
  }
  return level;
}

ChunkedQTable iterate_chunk_fixed_point(
    const TabularMDP& mdp, int h, double tol,
    const std::function<Vector(const Matrix&)>& state_value,
    std::vector<double>* sweep_deltas) {
  check_size_guard(mdp, h);
  mdp.validate();
  const long cols = chunk_count(mdp.num_actions, h);

  ChunkedQTable table;
  table.h = h;
  table.num_actions = mdp.num_actions;
  table.gamma = mdp.gamma;
  table.values = Matrix::Zero(mdp.num_states, cols);

  // Sup-norm contraction factor gamma^h; the start-up error is bounded by
  // the value scale 1/(1-gamma) plus the reward bound.
  const double contraction = std::pow(mdp.gamma, h);
  const double scale =
      mdp.gamma < 1.0 ? 1.0 / (1.0 - mdp.gamma) + mdp.reward.cwiseAbs()
                                                      .maxCoeff() + 1.0
                      : 1e6;
  const long max_sweeps =
      contraction <= 0.0
          ? h + 4
          : static_cast<long>(std::ceil((std::log(tol) - std::log(scale)) /
                                        std::log(contraction))) + 64;
  for (long sweep = 0; sweep < max_sweeps; ++sweep) {
    const Vector w = state_value(table.values);
    Matrix next = chunk_backup_sweep(mdp, h, w);
    const double delta = (next - table.values).cwiseAbs().maxCoeff();
    table.values = std::move(next);
    if (sweep_deltas) sweep_deltas->push_back(delta);
    if (delta < tol) return table;
  }
  return table;
}

}  // namespace

ChunkedQTable chunk_value_iteration(const TabularMDP& mdp, int h, double tol,
                                    std::vector<double>* sweep_deltas) {
  return iterate_chunk_fixed_point(
      mdp, h, tol,
      [](const Matrix& q) { return Vector(q.rowwise().maxCoeff()); },
      sweep_deltas);
}

ChunkedQTable policy_eval_chunked(const TabularMDP& mdp,
                                  const Matrix& chunk_policy, int h,
                                  double tol,
                                  std::vector<double>* sweep_deltas) {
  check_policy(chunk_policy, mdp.num_states, chunk_count(mdp.num_actions, h),
               "policy_eval_chunked");
  return iterate_chunk_fixed_point(
      mdp, h, tol,
      [&](const Matrix& q) {
        return Vector((q.cwiseProduct(chunk_policy)).rowwise().sum());
      },
      sweep_deltas);
}

Matrix policy_eval_q(const TabularMDP& mdp, const Matrix& policy, double) {
  check_policy(policy, mdp.num_states, mdp.num_actions, "policy_eval_q");
  mdp.validate();
  // direct solve of V = r_pi + gamma P_pi V, then one backup for Q
  Matrix p_pi = Matrix::Zero(mdp.num_states, mdp.num_states);
  Vector r_pi = Vector::Zero(mdp.num_states);
  for (int a = 0; a < mdp.num_actions; ++a) {
    p_pi += policy.col(a).asDiagonal() * mdp.transition[a];
    r_pi += policy.col(a).cwiseProduct(mdp.reward.col(a));
  }
  const Matrix system =
      Matrix::Identity(mdp.num_states, mdp.num_states) - mdp.gamma * p_pi;
  const Vector v = system.partialPivLu().solve(r_pi);
  Matrix q(mdp.num_states, mdp.num_actions);
  for (int a = 0; a < mdp.num_actions; ++a)
    q.col(a) = mdp.reward.col(a) + mdp.gamma * (mdp.transition[a] * v);
  return q;
}

Matrix nstep_bias_probe(const TabularMDP& mdp, const Matrix& behavior,
                        const Matrix& target, int n, double tol) {
  if (n < 1) throw std::invalid_argument("nstep_bias_probe: n must be >= 1");
  check_policy(behavior, mdp.num_states, mdp.num_actions, "behavior");
  check_policy(target, mdp.num_states, mdp.num_actions, "target");
  mdp.validate();

  const Matrix q_pi = policy_eval_q(mdp, target, tol);
  const Vector v_pi = (q_pi.cwiseProduct(target)).rowwise().sum();

  // Behavior-mixed transition and expected reward for steps 1..n-1.
  Matrix p_beh = Matrix::Zero(mdp.num_states, mdp.num_states);
  Vector r_beh = Vector::Zero(mdp.num_states);
  for (int a = 0; a < mdp.num_actions; ++a) {
    p_beh += behavior.col(a).asDiagonal() * mdp.transition[a];
    r_beh += behavior.col(a).cwiseProduct(mdp.reward.col(a));
  }

  Matrix bias(mdp.num_states, mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      Eigen::RowVectorXd d = mdp.transition[a].row(s);  // after step 0
      double estimate = mdp.reward(s, a);
      double g = mdp.gamma;
      for (int j = 1; j < n; ++j) {
        estimate += g * d.dot(r_beh);
        d = d * p_beh;
        g *= mdp.gamma;
      }
      estimate += g * d.dot(v_pi);
      bias(s, a) = estimate - q_pi(s, a);
    }
  }
  return bias;
}

Matrix markov_chunk_policy(const TabularMDP& mdp, const Matrix& policy,
                           int h) {
  check_policy(policy, mdp.num_states, mdp.num_actions, "markov_chunk_policy");
  const long cols = chunk_count(mdp.num_actions, h);
  check_size_guard(mdp, h);
  Matrix out(mdp.num_states, cols);

  for (int s0 = 0; s0 < mdp.num_states; ++s0) {
    // mu(s') = P(reach s' and take the prefix actions), grown action by
    // action; digit j of the chunk index is the step-j action.
    std::function<void(int, long, long, const Vector&)> walk =
        [&](int depth, long idx, long stride, const Vector& mu) {
          if (depth == h) {
            out(s0, idx) = mu.sum();
            return;
          }
          for (int a = 0; a < mdp.num_actions; ++a) {
            const Vector picked = mu.cwiseProduct(policy.col(a));
            const Vector next = mdp.transition[a].transpose() * picked;
            walk(depth + 1, idx + stride * a, stride * mdp.num_actions, next);
          }
        };
    Vector mu0 = Vector::Zero(mdp.num_states);
    mu0[s0] = 1.0;
    walk(0, 0, 1, mu0);
  }
  return out;
}

Matrix chain_behavior_policy(int positions) {
  const int s_count = chain_tabular_states(positions);
  Matrix p(s_count, 4);
  for (int s = 0; s < s_count; ++s) {
    p(s, kChainLeft) = 0.70;
    p(s, kChainRight) = 0.10;
    p(s, kChainNoop) = 0.15;
    p(s, kChainToggle) = 0.05;
  }
  return p;
}

Matrix chain_target_policy(int positions) {
  const int s_count = chain_tabular_states(positions);
  Matrix p(s_count, 4);
  for (int pos = 0; pos < positions; ++pos) {
    for (int flag = 0; flag < 2; ++flag) {
      const int s = chain_state_index(pos, flag != 0, positions);
      if (!flag) {
        p(s, kChainLeft) = 0.05;
        p(s, kChainRight) = 0.10;
        p(s, kChainNoop) = 0.05;
        p(s, kChainToggle) = 0.80;
      } else {
        p(s, kChainLeft) = 0.05;
        p(s, kChainRight) = 0.85;
        p(s, kChainNoop) = 0.05;
        p(s, kChainToggle) = 0.05;
      }
    }
  }
  return p;
}

}  // namespace qchunk
