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
// Zero-shot evaluation against exact oracles. A model is evaluated through a
// type-erased EvalSubject (task inference plus per-task state tables), so the
// same harness drives trained models and the exact-factorization reference:
//
//   - zero_shot_return  rollout return of the prompted policy vs the optimal
//                       policy's exact finite-horizon value
//   - q_model_error     critic readout vs the exact Q of the induced policy
//   - m_model_error     successor-model fit in relative Frobenius norm, with
//                       the best-achievable rank-d floor alongside
//   - reward_prediction_bias
//                       cumulative predicted-vs-actual return gap along
//                       rollout trajectories
//
// Every op is a pure read; rollout randomness is derived from
// (seed, task id, episode index) so independent tasks reproduce bit-for-bit
// in any execution order.

#ifndef FBRL_EVALUATION_HPP_
#define FBRL_EVALUATION_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fbrl/array.hpp"
#include "fbrl/common.hpp"
#include "fbrl/dataset.hpp"
#include "fbrl/fb_core.hpp"
#include "fbrl/linalg.hpp"
#include "fbrl/mdp.hpp"
#include "fbrl/networks.hpp"
#include "fbrl/rewards.hpp"
#include "fbrl/rng.hpp"
#include "fbrl/task_inference.hpp"

namespace fbrl {

// ---------------------------------------------------------------------------
// Options and subjects
// ---------------------------------------------------------------------------

struct EvalOptions {
  int episodes = 100;      // rollout episodes per task
  int horizon = 200;       // steps per episode
  int es_samples = 32;     // policy draws per action choice
  double vi_tol = 1e-10;   // optimal-policy oracle tolerance
  std::uint64_t seed = 0;  // root of all rollout randomness

  void validate() const {
    if (episodes < 1) throw ContractError("eval: episodes must be >= 1");
    if (horizon < 1) throw ContractError("eval: horizon must be >= 1");
    if (es_samples < 1) throw ContractError("eval: es_samples must be >= 1");
    if (!(vi_tol > 0.0)) throw ContractError("eval: vi_tol must be > 0");
  }
};

// A model under evaluation, reduced to what the harness needs: task
// inference and per-task tables. The closures hold references to the
// underlying model, which must outlive the subject.
struct EvalSubject {
  std::string variant;
  int n_states = 0;
  int n_actions = 0;
  int d = 0;
  double gamma = 0.0;
  std::vector<double> rho;

  std::function<InferredTask(const RewardFn&)> infer;
  std::function<Array2(const InferredTask&)> policy_table;     // S x A
  std::function<Array2(const InferredTask&)> q_table;          // S x A
  std::function<Array2(const InferredTask&)> b_table;          // S x d
  std::function<Array2(const InferredTask&)> successor_model;  // (S*A) x S
};

namespace detail {

// Mean forward features F(s, a, z) over the ensemble, one (S*A) x d matrix
// with the oracle row layout s * n_actions + a.
inline Array2 fb_forward_features(FbModel& model, const TaskVector& z) {
  const int s_count = model.n_states;
  const int a_count = model.n_actions;
  const Array2 z_rows = model.z_rows(z, s_count);
  Array2 features(s_count * a_count, model.d(), 0.0);
  const double inv_m =
      1.0 / static_cast<double>(model.f.members.size());
  for (int a = 0; a < a_count; ++a) {
    const Array2 a_rows =
        one_hot_rows(std::vector<int>(static_cast<std::size_t>(s_count), a),
                     a_count);
    for (ForwardNet& member : model.f.members) {
      const Array2 f = member.forward_value(model.state_enc, a_rows, z_rows);
      for (int s = 0; s < s_count; ++s) {
        for (int c = 0; c < model.d(); ++c) {
          features.at(s * a_count + a, c) += inv_m * f.at(s, c);
        }
      }
    }
  }
  return features;
}

}  // namespace detail

// An evaluation view of a trained model. The critic readout for a reward r
// is F(s, a, z)^T z_raw: the features are conditioned on the normalized task
// vector the networks were trained with, while the dot product uses the raw
// projection of r, which carries the reward's scale. Acting follows the
// variant: the advantage-weighted variant rolls out its trained policy
// (sharpened by evaluation sampling against the mean critic), the others act
// greedily on the critic. The induced successor model is
// mean_m F_m(s, a, z)^T B(x, z) rho(x). The model and dataset must outlive
// the subject.
inline EvalSubject make_eval_subject(FbModel& model, const OfflineDataset& ds) {
  EvalSubject subject;
  subject.variant = variant_name(model.cfg.variant);
  subject.n_states = model.n_states;
  subject.n_actions = model.n_actions;
  subject.d = model.d();
  subject.gamma = model.gamma();
  subject.rho = model.rho;

  FbModel* m = &model;
  const OfflineDataset* data = &ds;

  subject.infer = [m, data](const RewardFn& r) {
    Rng rng(data->seed);
    return infer_task(m->b, m->state_enc,
                      reward_samples_from_dataset(*data, r, rng));
  };
  auto q_fn = [m](const InferredTask& task) {
    const Array2 features = detail::fb_forward_features(*m, task.z);
    Array2 q(m->n_states, m->n_actions, 0.0);
    for (int s = 0; s < m->n_states; ++s) {
      for (int a = 0; a < m->n_actions; ++a) {
        double acc = 0.0;
        for (int c = 0; c < m->d(); ++c) {
          acc += features.at(s * m->n_actions + a, c) *
                 task.z_raw.z[static_cast<std::size_t>(c)];
        }
        q.at(s, a) = acc;
      }
    }
    return q;
  };
  subject.q_table = q_fn;
  if (model.cfg.variant == Variant::kAw) {
    subject.policy_table = [m](const InferredTask& task) {
      return m->policy_table(task.z);
    };
  } else {
    subject.policy_table = [q_fn](const InferredTask& task) {
      return greedy_policy(q_fn(task)).probs;
    };
  }
  subject.b_table = [m](const InferredTask& task) {
    return m->backward_table(task.z);
  };
  subject.successor_model = [m](const InferredTask& task) {
    const Array2 features = detail::fb_forward_features(*m, task.z);
    Array2 b = m->backward_table(task.z);
    Array2 out(m->n_states * m->n_actions, m->n_states, 0.0);
    for (int row = 0; row < out.rows; ++row) {
      for (int x = 0; x < m->n_states; ++x) {
        double acc = 0.0;
        for (int c = 0; c < m->d(); ++c) {
          acc += features.at(row, c) * b.at(x, c);
        }
        out.at(row, x) = acc * m->rho[static_cast<std::size_t>(x)];
      }
    }
    return out;
  };
  return subject;
}

// ---------------------------------------------------------------------------
// Exact-factorization reference model
// ---------------------------------------------------------------------------

// The d = |S| factorization that represents every task exactly:
//
//   B(x)    = e_x / sqrt(rho(x))            (fixed, task-independent)
//   z_raw   = E_rho[r B]    = diag(sqrt(rho)) r, so B^T z_raw = r
//   F(s, a) = M*(s, a, .) diag(1/sqrt(rho)) for the optimal policy of r
//
// giving F^T z_raw = M* r (the exact optimal Q) and F^T B rho = M* (the
// exact successor measure). Evaluation numbers for this model bound what any
// trained factorization can achieve, and exercising it end to end validates
// the harness itself.
struct ExactFactorizationModel {
  FiniteMdp mdp;
  std::vector<double> rho;
  double vi_tol = 1e-12;

  // Decodes the reward a raw task vector encodes: r(x) = z_raw(x) sqrt-scaled
  // back by the feature construction.
  RewardFn decode_reward(const TaskVector& z_raw) const {
    RewardFn r;
    r.values.resize(static_cast<std::size_t>(mdp.n_states));
    for (int x = 0; x < mdp.n_states; ++x) {
      r.values[static_cast<std::size_t>(x)] =
          z_raw.z[static_cast<std::size_t>(x)] /
          std::sqrt(rho[static_cast<std::size_t>(x)]);
    }
    return r;
  }
};

inline ExactFactorizationModel make_exact_factorization_model(
    const FiniteMdp& mdp, std::vector<double> rho = {}) {
  mdp.validate();
  if (rho.empty()) {
    rho.assign(static_cast<std::size_t>(mdp.n_states),
               1.0 / static_cast<double>(mdp.n_states));
  }
  if (static_cast<int>(rho.size()) != mdp.n_states) {
    throw DimensionError("exact factorization: rho size mismatch");
  }
  for (double p : rho) {
    if (!(p > 0.0)) {
      throw ContractError(
          "exact factorization: rho must be strictly positive");
    }
  }
  ExactFactorizationModel model;
  model.mdp = mdp;
  model.rho = std::move(rho);
  return model;
}

inline EvalSubject make_eval_subject(const ExactFactorizationModel& model) {
  EvalSubject subject;
  subject.variant = "exact";
  subject.n_states = model.mdp.n_states;
  subject.n_actions = model.mdp.n_actions;
  subject.d = model.mdp.n_states;
  subject.gamma = model.mdp.gamma;
  subject.rho = model.rho;

  const ExactFactorizationModel* m = &model;
  const int n = model.mdp.n_states;

  auto b_row = [m](int x, int i) {
    return x == i ? 1.0 / std::sqrt(m->rho[static_cast<std::size_t>(x)]) : 0.0;
  };
  auto forward_features = [m, n](const InferredTask& task) {
    // F = M* diag(1/sqrt(rho)) for the optimal policy of the decoded task.
    const RewardFn r = m->decode_reward(task.z_raw);
    const ValueIterationResult vi = value_iteration(m->mdp, r, m->vi_tol);
    Array2 f = successor_measure_exact(m->mdp, vi.pi).m;
    for (int row = 0; row < f.rows; ++row) {
      for (int x = 0; x < n; ++x) {
        f.at(row, x) /= std::sqrt(m->rho[static_cast<std::size_t>(x)]);
      }
    }
    return f;
  };

  subject.infer = [m, n, b_row](const RewardFn& r) {
    r.validate(n);
    TaskVector z_raw;
    z_raw.block_sizes = {n};
    z_raw.z.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int s = 0; s < n; ++s) {
        acc += m->rho[static_cast<std::size_t>(s)] *
               r.values[static_cast<std::size_t>(s)] * b_row(s, i);
      }
      z_raw.z[static_cast<std::size_t>(i)] = acc;
    }
    InferredTask task;
    task.z = normalize_z(z_raw);
    task.z_raw = std::move(z_raw);
    return task;
  };
  auto q_fn = [m, n, forward_features](const InferredTask& task) {
    const Array2 f = forward_features(task);
    Array2 q(n, m->mdp.n_actions, 0.0);
    for (int s = 0; s < n; ++s) {
      for (int a = 0; a < m->mdp.n_actions; ++a) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
          acc += f.at(m->mdp.sa_index(s, a), i) *
                 task.z_raw.z[static_cast<std::size_t>(i)];
        }
        q.at(s, a) = acc;
      }
    }
    return q;
  };
  subject.q_table = q_fn;
  // The policy readout is the optimal policy computed in exact arithmetic
  // inside value iteration, not a re-derived argmax of the q readout: when
  // several actions are exactly optimal, rounding in the factorized q values
  // could flip the argmax to a different (equally optimal) action, and the
  // successor measures of tied actions differ even though their values agree.
  subject.policy_table = [m](const InferredTask& task) {
    const RewardFn r = m->decode_reward(task.z_raw);
    return value_iteration(m->mdp, r, m->vi_tol).pi.probs;
  };
  subject.b_table = [n, b_row](const InferredTask&) {
    Array2 b(n, n, 0.0);
    for (int x = 0; x < n; ++x) {
      for (int i = 0; i < n; ++i) b.at(x, i) = b_row(x, i);
    }
    return b;
  };
  subject.successor_model = [m, n, b_row,
                             forward_features](const InferredTask& task) {
    const Array2 f = forward_features(task);
    Array2 out(f.rows, n, 0.0);
    for (int row = 0; row < f.rows; ++row) {
      for (int x = 0; x < n; ++x) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += f.at(row, i) * b_row(x, i);
        out.at(row, x) = acc * m->rho[static_cast<std::size_t>(x)];
      }
    }
    return out;
  };
  return subject;
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

// All randomness for one episode comes from (seed, task id, episode index).
inline Rng episode_rng(std::uint64_t seed, const std::string& task_id,
                       int episode) {
  return Rng(seed).split(fnv1a64(task_id)).split(
      static_cast<std::uint64_t>(episode));
}

// Evaluation-sampled action from tables: draw m_samples actions from the
// policy row and keep the best under the critic row, ties to the lowest
// action index. The m_samples = 1 case is a plain policy draw.
inline int es_act_from_tables(const Array2& policy_tbl, const Array2& q_tbl,
                              int s, int m_samples, Rng& rng) {
  if (m_samples < 1) {
    throw ContractError("es_act_from_tables: m_samples must be >= 1");
  }
  std::vector<double> p(static_cast<std::size_t>(policy_tbl.cols), 0.0);
  for (int a = 0; a < policy_tbl.cols; ++a) {
    p[static_cast<std::size_t>(a)] = policy_tbl.at(s, a);
  }
  int best_action = -1;
  double best_q = 0.0;
  for (int k = 0; k < m_samples; ++k) {
    const int a = rng.categorical(p);
    const double qa = q_tbl.at(s, a);
    if (best_action < 0 || qa > best_q || (qa == best_q && a < best_action)) {
      best_action = a;
      best_q = qa;
    }
  }
  return best_action;
}

struct RolloutSet {
  std::vector<std::vector<int>> states;  // per episode: s_1 .. s_H
  std::vector<double> returns;           // discounted return per episode
  double mean_return = 0.0;
};

// Uniform-start rollouts of a table policy. The return convention matches
// the oracles: reward is collected on successor states, discount starts at
// gamma, so an episode return is sum_{t=1..H} gamma^t r(s_t).
inline RolloutSet rollout_tables(const FiniteMdp& mdp, const Array2& policy_tbl,
                                 const Array2& q_tbl, const RewardFn& r,
                                 const std::string& task_id, int m_samples,
                                 const EvalOptions& opt) {
  opt.validate();
  r.validate(mdp.n_states);
  if (policy_tbl.rows != mdp.n_states || policy_tbl.cols != mdp.n_actions ||
      q_tbl.rows != mdp.n_states || q_tbl.cols != mdp.n_actions) {
    throw DimensionError("rollout_tables: table shape mismatch");
  }
  RolloutSet out;
  out.states.reserve(static_cast<std::size_t>(opt.episodes));
  out.returns.reserve(static_cast<std::size_t>(opt.episodes));
  for (int e = 0; e < opt.episodes; ++e) {
    Rng rng = episode_rng(opt.seed, task_id, e);
    int s = rng.uniform_int(mdp.n_states);
    std::vector<int> visited;
    visited.reserve(static_cast<std::size_t>(opt.horizon));
    double ret = 0.0;
    double discount = 1.0;
    for (int t = 0; t < opt.horizon; ++t) {
      const int a = es_act_from_tables(policy_tbl, q_tbl, s, m_samples, rng);
      s = mdp.sample_next(s, a, rng);
      discount *= mdp.gamma;
      ret += discount * r.values[static_cast<std::size_t>(s)];
      visited.push_back(s);
    }
    out.states.push_back(std::move(visited));
    out.returns.push_back(ret);
    out.mean_return += ret;
  }
  out.mean_return /= static_cast<double>(opt.episodes);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation operations
// ---------------------------------------------------------------------------

struct ZeroShotResult {
  double mean_return = 0.0;     // rollout average of the prompted policy
  double optimal_return = 0.0;  // exact finite-horizon value of the optimal
                                // policy, averaged over uniform starts
  double ratio = 0.0;
  double random_return = 0.0;   // uniform-policy rollout baseline
  double random_ratio = 0.0;
};

namespace detail {

inline double safe_ratio(double value, double reference) {
  if (reference != 0.0) return value / reference;
  return value == 0.0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
}

inline bool all_zero(const RewardFn& r) {
  for (double v : r.values) {
    if (v != 0.0) return false;
  }
  return true;
}

}  // namespace detail

inline ZeroShotResult zero_shot_return(EvalSubject& subject,
                                       const FiniteMdp& mdp, const RewardFn& r,
                                       const std::string& task_id,
                                       const EvalOptions& opt) {
  opt.validate();
  r.validate(mdp.n_states);
  if (detail::all_zero(r)) {
    // Nothing to optimize; every policy attains the optimum.
    return ZeroShotResult{0.0, 0.0, 1.0, 0.0, 1.0};
  }

  const InferredTask task = subject.infer(r);
  const Array2 policy_tbl = subject.policy_table(task);
  const Array2 q_tbl = subject.q_table(task);
  const RolloutSet rollouts = rollout_tables(mdp, policy_tbl, q_tbl, r,
                                             task_id, opt.es_samples, opt);

  const ValueIterationResult vi = value_iteration(mdp, r, opt.vi_tol);
  const std::vector<double> v_opt =
      policy_value_finite_horizon(mdp, vi.pi, r, opt.horizon);
  double optimal = 0.0;
  for (double v : v_opt) optimal += v;
  optimal /= static_cast<double>(mdp.n_states);

  const TabularPolicy uniform = uniform_policy(mdp);
  const Array2 q_zero(mdp.n_states, mdp.n_actions, 0.0);
  const RolloutSet random_rollouts = rollout_tables(
      mdp, uniform.probs, q_zero, r, task_id + "#random", 1, opt);

  ZeroShotResult result;
  result.mean_return = rollouts.mean_return;
  result.optimal_return = optimal;
  result.ratio = detail::safe_ratio(rollouts.mean_return, optimal);
  result.random_return = random_rollouts.mean_return;
  result.random_ratio = detail::safe_ratio(random_rollouts.mean_return,
                                           optimal);
  return result;
}

// Largest absolute gap between the model's critic readout and the exact Q of
// the policy the model itself induces (greedy on its critic). The gap is
// insensitive to how value ties break: any greedy-among-ties policy of an
// optimal critic shares the same exact Q.
inline double q_model_error(EvalSubject& subject, const FiniteMdp& mdp,
                            const RewardFn& r, const InferredTask& task) {
  r.validate(mdp.n_states);
  const Array2 q_hat = subject.q_table(task);
  const TabularPolicy pi = greedy_policy(q_hat);
  const Array2 q_exact = q_function_exact(mdp, pi, r);
  double worst = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      worst = std::max(worst, std::fabs(q_hat.at(s, a) - q_exact.at(s, a)));
    }
  }
  return worst;
}

struct MModelError {
  double error = 0.0;  // relative Frobenius error of the successor model
  double floor = 0.0;  // best achievable at the model's rank (tail singular
                       // values of the exact measure)
};

// Successor-model fit against the exact measure of the policy the subject
// acts with. The comparison policy comes from the subject's policy readout
// rather than a re-derived critic argmax, so exact value ties (two equally
// optimal actions whose successor measures differ) cannot flip the
// comparison away from the policy the model actually encodes.
inline MModelError m_model_error(EvalSubject& subject, const FiniteMdp& mdp,
                                 const InferredTask& task) {
  TabularPolicy pi;
  pi.probs = subject.policy_table(task);
  pi.validate();
  const Array2 m_exact = successor_measure_exact(mdp, pi).m;
  const Array2 m_model = subject.successor_model(task);
  if (m_model.rows != m_exact.rows || m_model.cols != m_exact.cols) {
    throw DimensionError("m_model_error: successor model shape mismatch");
  }

  double diff_sq = 0.0;
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < m_exact.size(); ++i) {
    const double d = m_model.data[i] - m_exact.data[i];
    diff_sq += d * d;
    norm_sq += m_exact.data[i] * m_exact.data[i];
  }
  const double norm = std::sqrt(norm_sq);

  MModelError out;
  out.error = std::sqrt(diff_sq) / norm;
  out.floor = rank_truncation_error(svd(m_exact).s, subject.d) / norm;
  return out;
}

// Cumulative predicted-minus-actual discounted return gap, per timestep,
// averaged over trajectories. The prediction for a state is B(s)^T z_raw:
// the model's reconstruction of the reward from its own task encoding.
inline std::vector<double> reward_prediction_bias(EvalSubject& subject,
                                                  const FiniteMdp& mdp,
                                                  const RewardFn& r,
                                                  const InferredTask& task,
                                                  const RolloutSet& rollouts) {
  r.validate(mdp.n_states);
  if (rollouts.states.empty()) {
    throw ContractError("reward_prediction_bias: no trajectories");
  }
  const Array2 b = subject.b_table(task);
  std::vector<double> predicted(static_cast<std::size_t>(mdp.n_states), 0.0);
  for (int s = 0; s < mdp.n_states; ++s) {
    double acc = 0.0;
    for (int c = 0; c < b.cols; ++c) {
      acc += b.at(s, c) * task.z_raw.z[static_cast<std::size_t>(c)];
    }
    predicted[static_cast<std::size_t>(s)] = acc;
  }

  const std::size_t horizon = rollouts.states.front().size();
  std::vector<double> bias(horizon, 0.0);
  for (const std::vector<int>& traj : rollouts.states) {
    if (traj.size() != horizon) {
      throw ContractError("reward_prediction_bias: ragged trajectories");
    }
    double gap = 0.0;
    double discount = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      discount *= mdp.gamma;
      const std::size_t s = static_cast<std::size_t>(traj[t]);
      gap += discount * (predicted[s] - r.values[s]);
      bias[t] += gap;
    }
  }
  for (double& v : bias) v /= static_cast<double>(rollouts.states.size());
  return bias;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct EvalRow {
  std::string variant;
  std::string dataset;
  std::string task;
  std::uint64_t seed = 0;
  double ret = 0.0;
  double optimal = 0.0;
  double ratio = 0.0;
  double q_err = 0.0;
  double m_err = 0.0;
  // Carried for summaries; not part of the CSV row.
  double random_ratio = 0.0;
  double m_floor = 0.0;
};

// One task end to end: prompt, roll out, compare against the oracles. The
// all-zero reward short-circuits with ratio 1 and no model diagnostics.
inline EvalRow evaluate_task(EvalSubject& subject, const FiniteMdp& mdp,
                             const NamedReward& task,
                             const std::string& dataset_label,
                             const EvalOptions& opt) {
  EvalRow row;
  row.variant = subject.variant;
  row.dataset = dataset_label;
  row.task = task.name;
  row.seed = opt.seed;

  const ZeroShotResult zs =
      zero_shot_return(subject, mdp, task.reward, task.name, opt);
  row.ret = zs.mean_return;
  row.optimal = zs.optimal_return;
  row.ratio = zs.ratio;
  row.random_ratio = zs.random_ratio;

  if (detail::all_zero(task.reward)) {
    row.q_err = std::numeric_limits<double>::quiet_NaN();
    row.m_err = std::numeric_limits<double>::quiet_NaN();
    row.m_floor = std::numeric_limits<double>::quiet_NaN();
    return row;
  }

  const InferredTask inferred = subject.infer(task.reward);
  row.q_err = q_model_error(subject, mdp, task.reward, inferred);
  const MModelError m_err = m_model_error(subject, mdp, inferred);
  row.m_err = m_err.error;
  row.m_floor = m_err.floor;
  return row;
}

inline std::string eval_report_csv(const std::vector<EvalRow>& rows) {
  std::ostringstream out;
  out << "variant,dataset,task,seed,return,optimal,ratio,q_err,m_err\n";
  for (const EvalRow& r : rows) {
    out << r.variant << "," << r.dataset << "," << r.task << "," << r.seed
        << "," << format_g17(r.ret) << "," << format_g17(r.optimal) << ","
        << format_g17(r.ratio) << "," << format_g17(r.q_err) << ","
        << format_g17(r.m_err) << "\n";
  }
  return out.str();
}

// Mean and sample standard deviation (n - 1) of the ratio across seeds,
// grouped per (variant, task) and overall per variant. The shape mirrors the
// usual "mean +/- std over seeds" result tables.
struct EvalGroupSummary {
  std::string variant;
  std::string task;  // empty for the per-variant aggregate
  int n_seeds = 0;
  double ratio_mean = 0.0;
  double ratio_std = 0.0;
  double q_err_mean = 0.0;
  double m_err_mean = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size() - 1);
  return {mean, std::sqrt(var)};
}

}  // namespace detail

inline std::vector<EvalGroupSummary> summarize_eval_rows(
    const std::vector<EvalRow>& rows) {
  // Per (variant, task): ratios per seed.
  std::map<std::pair<std::string, std::string>, std::vector<EvalRow>> by_task;
  // Per (variant, seed): mean ratio over tasks, for the variant aggregate.
  std::map<std::pair<std::string, std::uint64_t>, std::vector<double>>
      by_variant_seed;
  for (const EvalRow& r : rows) {
    by_task[{r.variant, r.task}].push_back(r);
    by_variant_seed[{r.variant, r.seed}].push_back(r.ratio);
  }

  std::vector<EvalGroupSummary> out;
  for (const auto& [key, group] : by_task) {
    EvalGroupSummary s;
    s.variant = key.first;
    s.task = key.second;
    s.n_seeds = static_cast<int>(group.size());
    std::vector<double> ratios, q_errs, m_errs;
    for (const EvalRow& r : group) {
      ratios.push_back(r.ratio);
      q_errs.push_back(r.q_err);
      m_errs.push_back(r.m_err);
    }
    const auto [rm, rs] = detail::mean_std(ratios);
    s.ratio_mean = rm;
    s.ratio_std = rs;
    s.q_err_mean = detail::mean_std(q_errs).first;
    s.m_err_mean = detail::mean_std(m_errs).first;
    out.push_back(std::move(s));
  }

  std::map<std::string, std::vector<double>> variant_seed_means;
  for (const auto& [key, ratios] : by_variant_seed) {
    variant_seed_means[key.first].push_back(
        detail::mean_std(ratios).first);
  }
  for (const auto& [variant, seed_means] : variant_seed_means) {
    EvalGroupSummary s;
    s.variant = variant;
    s.task = "";
    s.n_seeds = static_cast<int>(seed_means.size());
    const auto [rm, rs] = detail::mean_std(seed_means);
    s.ratio_mean = rm;
    s.ratio_std = rs;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fbrl

#endif  // FBRL_EVALUATION_HPP_
