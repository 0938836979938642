// Copyright 2026 The fbrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Actor objectives: the TD3-style greedy loss, advantage-weighted regression
// with WIS and improved-WIS weights, and evaluation-based action sampling.
// With discrete actions, every expectation over the policy is computed
// exactly by enumerating actions instead of sampling.

#ifndef FBRL_POLICY_OPT_HPP_
#define FBRL_POLICY_OPT_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "fbrl/array.hpp"
#include "fbrl/autodiff.hpp"
#include "fbrl/common.hpp"
#include "fbrl/networks.hpp"
#include "fbrl/rng.hpp"

namespace fbrl {

// Probability floor applied to log-likelihoods in the actor loss; clamped
// entries contribute no gradient and are counted in the loss report.
inline constexpr double kLogProbFloor = 1e-12;

// ---------------------------------------------------------------------------
// Q tables (value-only)
// ---------------------------------------------------------------------------

// Q_m[n][a] = F_m(s_n, a, z_n)^T z_n for every action, one ensemble member.
// Value-only: used where critics are frozen (advantages, action selection).
inline Array2 member_q_table(ForwardNet& member, const Array2& s_enc,
                             const Array2& z) {
  const int n = s_enc.rows;
  const int n_actions = member.n_actions;
  Array2 q(n, n_actions, 0.0);
  std::vector<int> same_action(static_cast<std::size_t>(n), 0);
  for (int a = 0; a < n_actions; ++a) {
    for (int& v : same_action) v = a;
    const Array2 f = member.forward_value(
        s_enc, one_hot_rows(same_action, n_actions), z);
    for (int row = 0; row < n; ++row) {
      double dot = 0.0;
      for (int c = 0; c < f.cols; ++c) dot += f.at(row, c) * z.at(row, c);
      q.at(row, a) = dot;
    }
  }
  return q;
}

// Mean-over-members and min-over-members Q tables for the whole ensemble.
struct EnsembleQTables {
  Array2 mean;  // n x n_actions
  Array2 min;   // n x n_actions
  Array2 sum;   // n x n_actions (the literal un-normalized ensemble total)
};

inline EnsembleQTables ensemble_q_tables(ForwardEnsemble& ensemble,
                                         const Array2& s_enc,
                                         const Array2& z) {
  if (ensemble.size() < 1) throw ContractError("empty forward ensemble");
  EnsembleQTables out;
  for (int m = 0; m < ensemble.size(); ++m) {
    Array2 q = member_q_table(ensemble.members[static_cast<std::size_t>(m)],
                              s_enc, z);
    if (m == 0) {
      out.sum = q;
      out.min = q;
    } else {
      for (std::size_t i = 0; i < q.size(); ++i) {
        out.sum.data[i] += q.data[i];
        out.min.data[i] = std::min(out.min.data[i], q.data[i]);
      }
    }
  }
  out.mean = out.sum;
  for (double& v : out.mean.data) v /= ensemble.size();
  return out;
}

// ---------------------------------------------------------------------------
// Advantages and regression weights
// ---------------------------------------------------------------------------

// Per-sample advantages, raw WIS weights and improved weights.
struct AdvantageBatch {
  std::vector<double> advantages;
  std::vector<double> w;           // WIS: softmax(A / beta)
  std::vector<double> w_improved;  // IWIS: u_i = w_i / (1 - w_i), normalized
};

// A(s,a,z) = value(s,a,z) - E_{a' ~ pi(.|s,z)}[ min_m F_m(s,a',z)^T z ].
// The value term averages the ensemble so A does not scale with the member
// count M (which would silently rescale beta); literal_sum = true keeps the
// raw over-members sum instead. The expectation over a' is exact.
inline std::vector<double> advantages(ForwardEnsemble& ensemble,
                                      PolicyNet& policy, const Array2& s_enc,
                                      const std::vector<int>& actions,
                                      const Array2& z,
                                      bool literal_sum = false) {
  const int n = s_enc.rows;
  if (static_cast<int>(actions.size()) != n || z.rows != n) {
    throw DimensionError("advantages: batch size mismatch");
  }
  const EnsembleQTables q = ensemble_q_tables(ensemble, s_enc, z);
  const Array2 probs = policy.distribution(s_enc, z);
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int row = 0; row < n; ++row) {
    const int a = actions[static_cast<std::size_t>(row)];
    if (a < 0 || a >= q.mean.cols) {
      throw ContractError("advantages: action index out of range");
    }
    double baseline = 0.0;
    for (int cand = 0; cand < q.min.cols; ++cand) {
      baseline += probs.at(row, cand) * q.min.at(row, cand);
    }
    const double value =
        literal_sum ? q.sum.at(row, a) : q.mean.at(row, a);
    out[static_cast<std::size_t>(row)] = value - baseline;
  }
  return out;
}

// Softmax of A / beta over the batch, max-subtracted for stability.
inline std::vector<double> wis_weights(const std::vector<double>& adv,
                                       double beta) {
  if (!(beta > 0.0)) throw ContractError("wis_weights: beta must be > 0");
  if (adv.empty()) throw ContractError("wis_weights: empty batch");
  double top = adv[0];
  for (double a : adv) top = std::max(top, a);
  std::vector<double> w(adv.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    w[i] = std::exp((adv[i] - top) / beta);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Improved weights: u_i = w_i / (1 - w_i), renormalized. Upweights
// above-average samples relative to WIS (u/w is increasing in w), which
// knocks the leading O(1/n) term out of the self-normalized estimator bias.
inline std::vector<double> iwis_from_wis(const std::vector<double>& w) {
  if (w.size() < 2) {
    throw ContractError("iwis weights: need at least two samples");
  }
  std::vector<double> u(w.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] >= 1.0) {
      throw ContractError(
          "iwis weights: a weight collapsed to 1 (degenerate batch)");
    }
    u[i] = w[i] / (1.0 - w[i]);
    total += u[i];
  }
  for (double& v : u) v /= total;
  return u;
}

inline std::vector<double> iwis_weights(const std::vector<double>& adv,
                                        double beta) {
  return iwis_from_wis(wis_weights(adv, beta));
}

inline AdvantageBatch advantage_batch(ForwardEnsemble& ensemble,
                                      PolicyNet& policy, const Array2& s_enc,
                                      const std::vector<int>& actions,
                                      const Array2& z, double beta,
                                      bool literal_sum = false) {
  AdvantageBatch out;
  out.advantages =
      advantages(ensemble, policy, s_enc, actions, z, literal_sum);
  out.w = wis_weights(out.advantages, beta);
  out.w_improved = iwis_from_wis(out.w);
  return out;
}

// ---------------------------------------------------------------------------
// Actor losses (taped)
// ---------------------------------------------------------------------------

struct AwActorLoss {
  Var loss;            // scalar node on the caller's tape
  int clamped = 0;     // samples that hit the log-probability floor
};

// Negative weighted log-likelihood of the dataset actions:
// -sum_i weight_i * log pi(a_i | s_i, z_i). Weights are plain numbers
// (advantages are computed outside any tape), so gradients reach the policy
// parameters only.
inline AwActorLoss aw_actor_loss(Tape& t, PolicyNet& policy,
                                 const Array2& s_enc,
                                 const std::vector<int>& actions,
                                 const Array2& z,
                                 const std::vector<double>& weights) {
  const int n = s_enc.rows;
  if (static_cast<int>(actions.size()) != n ||
      static_cast<int>(weights.size()) != n) {
    throw DimensionError("aw_actor_loss: batch size mismatch");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ContractError("aw_actor_loss: negative weight");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw ContractError("aw_actor_loss: weights sum to " + format_g17(total));
  }

  Var logits = policy.forward_logits(t, t.constant(s_enc), t.constant(z),
                                     /*trainable=*/true);
  Var logp_all = t.log_softmax_rows(logits);
  Var logp = t.select_per_row(logp_all, actions);  // n x 1
  Var floored = t.max_scalar(logp, std::log(kLogProbFloor));

  AwActorLoss out;
  const Array2& lv = t.val(logp);
  for (int row = 0; row < n; ++row) {
    if (lv.at(row, 0) < std::log(kLogProbFloor)) ++out.clamped;
  }
  Array2 w_col(n, 1, 0.0);
  for (int row = 0; row < n; ++row) {
    w_col.at(row, 0) = weights[static_cast<std::size_t>(row)];
  }
  out.loss = t.scale(t.sum_all(t.mul(floored, t.constant(w_col))), -1.0);
  return out;
}

// TD3-style greedy objective with the action expectation taken exactly:
// -(1/n) sum_i sum_a pi(a|s_i,z_i) * min_m F_m(s_i,a,z_i)^T z_i.
// The critic enters as a constant table; gradients reach the policy only.
inline Var td3_actor_loss(Tape& t, ForwardEnsemble& ensemble,
                          PolicyNet& policy, const Array2& s_enc,
                          const Array2& z) {
  const EnsembleQTables q = ensemble_q_tables(ensemble, s_enc, z);
  Var logits = policy.forward_logits(t, t.constant(s_enc), t.constant(z),
                                     /*trainable=*/true);
  Var probs = t.softmax_rows(logits);
  Var expected = t.rowwise_sum(t.mul(probs, t.constant(q.min)));
  return t.scale(t.mean_all(expected), -1.0);
}

// ---------------------------------------------------------------------------
// Evaluation-based action selection
// ---------------------------------------------------------------------------

// Draw m_samples actions from pi(.|s,z) and return the drawn action with the
// highest mean-ensemble Q; exact ties resolve to the lowest action index.
inline int evaluation_sampling_act(PolicyNet& policy,
                                   ForwardEnsemble& ensemble,
                                   const Array2& s_enc_row,
                                   const std::vector<double>& z,
                                   int m_samples, Rng& rng) {
  if (m_samples < 1) {
    throw ContractError("evaluation_sampling_act: m_samples must be >= 1");
  }
  if (s_enc_row.rows != 1) {
    throw DimensionError("evaluation_sampling_act: expected one state row");
  }
  const Array2 z_row = Array2::tile_rows(z, 1);
  const Array2 probs = policy.distribution(s_enc_row, z_row);
  std::vector<double> p(static_cast<std::size_t>(probs.cols), 0.0);
  for (int a = 0; a < probs.cols; ++a) p[static_cast<std::size_t>(a)] = probs.at(0, a);

  const EnsembleQTables q = ensemble_q_tables(ensemble, s_enc_row, z_row);
  int best_action = -1;
  double best_q = 0.0;
  for (int k = 0; k < m_samples; ++k) {
    const int a = rng.categorical(p);
    const double qa = q.mean.at(0, a);
    if (best_action < 0 || qa > best_q ||
        (qa == best_q && a < best_action)) {
      best_action = a;
      best_q = qa;
    }
  }
  return best_action;
}

}  // namespace fbrl

#endif  // FBRL_POLICY_OPT_HPP_
