#pragma once

#include <vector>

#include "qchunk/env.hpp"
#include "qchunk/types.hpp"

namespace qchunk {

// Exact Q-table over (state, chunk) pairs. Chunk index encoding: the action
// executed at step j is digit j in base num_actions, least significant
// first, so idx = sum_j a_j * A^j.
struct ChunkedQTable {
  Matrix values;  // S x A^h
  int h = 1;
  int num_actions = 0;
  double gamma = 0.99;
};

long chunk_count(int num_actions, int h);
std::vector<int> decode_chunk(long idx, int num_actions, int h);
long encode_chunk(const std::vector<int>& actions, int num_actions);

// Fixed point of the chunked optimality backup
//   Q(s, a_0..a_{h-1}) = E[ sum_j gamma^j r_j + gamma^h max_a' Q(s_h, a') ]
// iterated until the sup-norm sweep change drops below tol. Absorbing states
// hold value 0 throughout. Guarded to S * A^h <= 10^7 entries.
ChunkedQTable chunk_value_iteration(const TabularMDP& mdp, int h,
                                    double tol = 1e-10,
                                    std::vector<double>* sweep_deltas =
                                        nullptr);

// Evaluation fixed point for a fixed open-loop chunk policy, given as a
// S x A^h row-stochastic table.
ChunkedQTable policy_eval_chunked(const TabularMDP& mdp,
                                  const Matrix& chunk_policy, int h,
                                  double tol = 1e-10,
                                  std::vector<double>* sweep_deltas =
                                      nullptr);

// Exact bias of the uncorrected n-step target under off-policy data:
//   B(s,a) = E_behavior[ sum_{j<n} gamma^j r_j
//                        + gamma^n Q_pi(s_n, a_n ~ target) ] - Q_pi(s,a)
// where the first step executes a, steps 1..n-1 follow the behavior policy,
// and Q_pi is the exact 1-step evaluation of the target policy. Everything
// is computed by enumeration; no sampling.
Matrix nstep_bias_probe(const TabularMDP& mdp, const Matrix& behavior,
                        const Matrix& target, int n, double tol = 1e-12);

// Exact 1-step policy evaluation Q_pi (S x A) of a Markov policy.
Matrix policy_eval_q(const TabularMDP& mdp, const Matrix& policy,
                     double tol = 1e-12);

// Open-loop chunk distribution (S x A^h) induced by rolling a Markov
// single-step policy for h steps, marginalizing intermediate states.
Matrix markov_chunk_policy(const TabularMDP& mdp, const Matrix& policy,
                           int h);

// Canonical probe policies on the chain's tabular states: a behavior that
// walks away from the goal and a target that toggles the flag and heads
// right. Rows are distributions over the four chain moves.
Matrix chain_behavior_policy(int positions);
Matrix chain_target_policy(int positions);

}  // namespace qchunk
