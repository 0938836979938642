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
// Zero-shot task encoding. A reward observed on states sampled from the
// dataset distribution is turned into a task vector z three ways:
//
//   - linear projection        z = mean_n r(s_n) B(s_n)          (K = 1)
//   - blockwise autoregressive z_i = mean_n r(s_n) B_i(s_n, z_{<i})
//   - goal prompting           z_i = B_i(goal, z_{<i})
//
// The blockwise computation is a direct evaluation, not an iteration: the
// masking guarantees block i of the output never reads z blocks >= i, so one
// sweep lands exactly on the fixed point of the empirical projection
// equations. fixed_point_residual re-evaluates that system as a diagnostic.
//
// universal_approximation_check validates, on an exact tabular instance, the
// constructive argument that two feature levels suffice to represent any
// continuous task encoder vanishing at zero.

#ifndef FBRL_TASK_INFERENCE_HPP_
#define FBRL_TASK_INFERENCE_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fbrl/array.hpp"
#include "fbrl/common.hpp"
#include "fbrl/dataset.hpp"
#include "fbrl/mdp.hpp"
#include "fbrl/networks.hpp"
#include "fbrl/rng.hpp"

namespace fbrl {

// ---------------------------------------------------------------------------
// Reward samples
// ---------------------------------------------------------------------------

// One reward observation r(state) with a sampling weight. Monte-Carlo draws
// carry weight 1; exact full-state sums carry weight rho(state), so both
// paths run through the same weighted-mean code.
struct RewardSample {
  int state = 0;
  double reward = 0.0;
  double weight = 1.0;
};

// Default cap on the number of states consumed by task inference.
inline constexpr std::size_t kMaxInferenceSamples = 100000;

inline void validate_reward_samples(const std::vector<RewardSample>& samples,
                                    int n_states) {
  if (samples.empty()) {
    throw ContractError("task inference: empty reward sample set");
  }
  double total_weight = 0.0;
  for (const RewardSample& s : samples) {
    if (s.state < 0 || s.state >= n_states) {
      throw ContractError("task inference: sample state " +
                          std::to_string(s.state) + " out of range");
    }
    if (!std::isfinite(s.reward)) {
      throw ContractError("task inference: non-finite reward sample");
    }
    if (!(s.weight >= 0.0) || !std::isfinite(s.weight)) {
      throw ContractError("task inference: sample weight must be >= 0");
    }
    total_weight += s.weight;
  }
  if (!(total_weight > 0.0)) {
    throw ContractError("task inference: total sample weight is zero");
  }
}

// Every state once, weighted by its probability: the exact expectation path.
inline std::vector<RewardSample> reward_samples_exact(
    const RewardFn& r, const std::vector<double>& rho) {
  if (r.values.size() != rho.size()) {
    throw DimensionError("reward_samples_exact: reward has " +
                         std::to_string(r.values.size()) +
                         " values, rho has " + std::to_string(rho.size()));
  }
  std::vector<RewardSample> out;
  out.reserve(rho.size());
  for (std::size_t s = 0; s < rho.size(); ++s) {
    out.push_back(RewardSample{static_cast<int>(s), r.values[s], rho[s]});
  }
  return out;
}

// Monte-Carlo path: states are the dataset's next states (the empirical
// distribution the features integrate against). If the pool fits under
// max_samples it is used in full and deterministically; otherwise
// max_samples states are drawn uniformly with replacement.
inline std::vector<RewardSample> reward_samples_from_dataset(
    const OfflineDataset& ds, const RewardFn& r, Rng& rng,
    std::size_t max_samples = kMaxInferenceSamples) {
  ds.validate();
  r.validate(ds.n_states);
  if (max_samples == 0) {
    throw ContractError("reward_samples_from_dataset: max_samples must be > 0");
  }
  if (ds.transitions.empty()) {
    throw ContractError("reward_samples_from_dataset: empty dataset");
  }
  std::vector<RewardSample> out;
  if (ds.transitions.size() <= max_samples) {
    out.reserve(ds.transitions.size());
    for (const Transition& t : ds.transitions) {
      out.push_back(RewardSample{
          t.s_next, r.values[static_cast<std::size_t>(t.s_next)], 1.0});
    }
  } else {
    out.reserve(max_samples);
    const int pool = static_cast<int>(ds.transitions.size());
    for (std::size_t i = 0; i < max_samples; ++i) {
      const int s_next =
          ds.transitions[static_cast<std::size_t>(rng.uniform_int(pool))]
              .s_next;
      out.push_back(RewardSample{
          s_next, r.values[static_cast<std::size_t>(s_next)], 1.0});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Blockwise inference
// ---------------------------------------------------------------------------

namespace detail {

// Weighted mean of r_n * out(n, c) for columns [col0, col1). The same
// accumulation order serves the one-shot linear path and the per-block
// autoregressive path, which is what makes their K = 1 outputs bit-identical.
inline void weighted_feature_mean(const Array2& out,
                                  const std::vector<RewardSample>& samples,
                                  int col0, int col1, double total_weight,
                                  std::vector<double>& dst) {
  for (int c = col0; c < col1; ++c) {
    double acc = 0.0;
    for (std::size_t n = 0; n < samples.size(); ++n) {
      acc += samples[n].weight * samples[n].reward *
             out.at(static_cast<int>(n), c);
    }
    dst[static_cast<std::size_t>(c)] = acc / total_weight;
  }
}

inline Array2 gather_sample_encodings(const Array2& state_enc,
                                      const std::vector<RewardSample>& samples) {
  Array2 enc(static_cast<int>(samples.size()), state_enc.cols, 0.0);
  for (std::size_t n = 0; n < samples.size(); ++n) {
    for (int c = 0; c < state_enc.cols; ++c) {
      enc.at(static_cast<int>(n), c) = state_enc.at(samples[n].state, c);
    }
  }
  return enc;
}

inline double total_sample_weight(const std::vector<RewardSample>& samples) {
  double w = 0.0;
  for (const RewardSample& s : samples) w += s.weight;
  return w;
}

}  // namespace detail

// A task vector in both the form the networks consume and the raw form the
// projection equations produce.
struct InferredTask {
  TaskVector z;      // normalized to ||z|| = sqrt(d)
  TaskVector z_raw;  // unnormalized weighted mean; exact fixed point of the
                     // empirical projection equations on the sample set
};

// Blockwise autoregressive inference. Unfilled blocks are held at the same
// placeholder the training-time anchored task draws use (all ones), and each
// pass conditions on the residual-normalized partial vector, so the sweep
// reproduces the training-time conditioning exactly. Throws a degenerate-task
// ContractError if a leading block (K > 1) or the whole vector (K = 1) comes
// out zero.
inline InferredTask infer_task(BackwardNet& net, const Array2& state_enc,
                               const std::vector<RewardSample>& samples) {
  validate_reward_samples(samples, state_enc.rows);
  if (state_enc.cols != net.state_dim) {
    throw DimensionError("infer_task: state encoding width " +
                         std::to_string(state_enc.cols) +
                         ", network expects " +
                         std::to_string(net.state_dim));
  }
  const Array2 enc = detail::gather_sample_encodings(state_enc, samples);
  const double total_weight = detail::total_sample_weight(samples);
  const int rows = enc.rows;

  TaskVector z_raw;
  z_raw.block_sizes = net.block_sizes;
  z_raw.z.assign(static_cast<std::size_t>(net.d), 1.0);

  int offset = 0;
  for (int b : net.block_sizes) {
    const TaskVector cond = residual_ar_normalize(z_raw);
    const Array2 out =
        net.forward_value(enc, Array2::tile_rows(cond.z, rows));
    detail::weighted_feature_mean(out, samples, offset, offset + b,
                                  total_weight, z_raw.z);
    offset += b;
  }

  InferredTask task;
  task.z = normalize_z(z_raw);  // throws on the all-zero degenerate case
  task.z_raw = std::move(z_raw);
  return task;
}

// Blockwise inference for any K. Returns the normalized vector.
inline TaskVector infer_z_autoregressive(
    BackwardNet& net, const Array2& state_enc,
    const std::vector<RewardSample>& samples) {
  return infer_task(net, state_enc, samples).z;
}

// Linear projection: one feature evaluation, one weighted mean. Defined for
// K = 1 networks only; the autoregressive sweep reduces to this bit-for-bit
// because both run the identical single pass.
inline TaskVector infer_z_linear(BackwardNet& net, const Array2& state_enc,
                                 const std::vector<RewardSample>& samples) {
  if (net.blocks() != 1) {
    throw ContractError("infer_z_linear: network has " +
                        std::to_string(net.blocks()) +
                        " blocks, linear inference requires exactly 1");
  }
  validate_reward_samples(samples, state_enc.rows);
  if (state_enc.cols != net.state_dim) {
    throw DimensionError("infer_z_linear: state encoding width " +
                         std::to_string(state_enc.cols) +
                         ", network expects " +
                         std::to_string(net.state_dim));
  }
  const Array2 enc = detail::gather_sample_encodings(state_enc, samples);
  const double total_weight = detail::total_sample_weight(samples);

  TaskVector z_raw;
  z_raw.block_sizes = net.block_sizes;
  z_raw.z.assign(static_cast<std::size_t>(net.d), 1.0);
  const TaskVector cond = residual_ar_normalize(z_raw);
  const Array2 out =
      net.forward_value(enc, Array2::tile_rows(cond.z, enc.rows));
  detail::weighted_feature_mean(out, samples, 0, net.d, total_weight,
                                z_raw.z);
  return normalize_z(z_raw);
}

// Goal prompting: the anchored task draw evaluated at a chosen state. One
// blockwise fill-in at the goal row, then normalization.
inline TaskVector infer_z_goal(BackwardNet& net, const Array2& state_enc,
                               int goal_state) {
  if (goal_state < 0 || goal_state >= state_enc.rows) {
    throw ContractError("infer_z_goal: goal state " +
                        std::to_string(goal_state) + " out of range");
  }
  if (state_enc.cols != net.state_dim) {
    throw DimensionError("infer_z_goal: state encoding width " +
                         std::to_string(state_enc.cols) +
                         ", network expects " +
                         std::to_string(net.state_dim));
  }
  Array2 row(1, state_enc.cols, 0.0);
  for (int c = 0; c < state_enc.cols; ++c) {
    row.at(0, c) = state_enc.at(goal_state, c);
  }
  TaskVector z;
  z.block_sizes = net.block_sizes;
  z.z = blockwise_backward_fill(net, row);
  return normalize_z(z);
}

// L2 residual of the projection equations at z_raw on the given samples:
// || z_raw - mean_n r_n B(s_n, z_raw) ||. Zero (to rounding) for the z_raw
// returned by infer_task, because the masking makes the sweep a direct
// solution of exactly this system.
inline double fixed_point_residual(BackwardNet& net, const Array2& state_enc,
                                   const std::vector<RewardSample>& samples,
                                   const TaskVector& z_raw) {
  validate_reward_samples(samples, state_enc.rows);
  z_raw.validate();
  if (z_raw.d() != net.d) {
    throw DimensionError("fixed_point_residual: task dimension " +
                         std::to_string(z_raw.d()) + ", network expects " +
                         std::to_string(net.d));
  }
  const Array2 enc = detail::gather_sample_encodings(state_enc, samples);
  const double total_weight = detail::total_sample_weight(samples);
  const TaskVector cond = residual_ar_normalize(z_raw);
  const Array2 out =
      net.forward_value(enc, Array2::tile_rows(cond.z, enc.rows));
  std::vector<double> mean(static_cast<std::size_t>(net.d), 0.0);
  detail::weighted_feature_mean(out, samples, 0, net.d, total_weight, mean);
  double sq = 0.0;
  for (int i = 0; i < net.d; ++i) {
    const double diff =
        z_raw.z[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

// ---------------------------------------------------------------------------
// Universal approximation of task encoders
// ---------------------------------------------------------------------------

// An arbitrary task encoder: rewards (one value per state) to R^d.
using TaskEncoder =
    std::function<std::vector<double>(const std::vector<double>&)>;

namespace detail {

// Numerical gradient and Hessian of each encoder component at zero, by
// central differences. Only continuity of the construction depends on their
// accuracy; the reconstruction identity below is exact for any values here.
struct EncoderTaylor {
  Array2 grad;                 // d x n
  std::vector<Array2> hess;    // d matrices, n x n
};

inline EncoderTaylor encoder_taylor_at_zero(const TaskEncoder& zeta, int n,
                                            int d, double h) {
  EncoderTaylor t;
  t.grad = Array2(d, n, 0.0);
  t.hess.assign(static_cast<std::size_t>(d), Array2(n, n, 0.0));
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  auto eval = [&](const std::vector<double>& arg) {
    std::vector<double> out = zeta(arg);
    if (static_cast<int>(out.size()) != d) {
      throw ContractError("task encoder changed output dimension");
    }
    return out;
  };
  for (int j = 0; j < n; ++j) {
    x[static_cast<std::size_t>(j)] = h;
    const std::vector<double> plus = eval(x);
    x[static_cast<std::size_t>(j)] = -h;
    const std::vector<double> minus = eval(x);
    x[static_cast<std::size_t>(j)] = 0.0;
    for (int i = 0; i < d; ++i) {
      t.grad.at(i, j) = (plus[static_cast<std::size_t>(i)] -
                         minus[static_cast<std::size_t>(i)]) /
                        (2.0 * h);
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      x[static_cast<std::size_t>(j)] += h;
      x[static_cast<std::size_t>(k)] += h;
      const std::vector<double> pp = eval(x);
      x[static_cast<std::size_t>(k)] -= 2.0 * h;
      const std::vector<double> pm = eval(x);
      x[static_cast<std::size_t>(j)] -= 2.0 * h;
      const std::vector<double> mm = eval(x);
      x[static_cast<std::size_t>(k)] += 2.0 * h;
      const std::vector<double> mp = eval(x);
      x[static_cast<std::size_t>(j)] += h;
      x[static_cast<std::size_t>(k)] -= h;
      for (int i = 0; i < d; ++i) {
        t.hess[static_cast<std::size_t>(i)].at(j, k) =
            (pp[static_cast<std::size_t>(i)] -
             pm[static_cast<std::size_t>(i)] -
             mp[static_cast<std::size_t>(i)] +
             mm[static_cast<std::size_t>(i)]) /
            (4.0 * h * h);
      }
    }
  }
  return t;
}

}  // namespace detail

// Constructive check that two feature levels reproduce an arbitrary encoder:
//
//   level 1: B1(s) = e_s / rho(s), so z1 = E_rho[r B1] recovers r itself;
//   level 2: B2(s, z1)_i = g_i(z1)_s / rho(s), where g_i is built from the
//            Taylor/residual split of component i of the encoder,
//              g_i(x) = D_i + (1/2) H_i x + (R_i(x) / ||x||^2) x,
//            which satisfies g_i(x)^T x = zeta_i(x) identically.
//
// Then E_rho[r B2(s, z1)] = g(z1)^T r = zeta(r) up to rounding. Returns the
// max absolute reconstruction error over all test rewards and components.
// The encoder must vanish at zero (otherwise no such split exists) and rho
// must be strictly positive.
inline double universal_approximation_check(
    const FiniteMdp& mdp, const TaskEncoder& zeta,
    const std::vector<std::vector<double>>& test_rewards,
    std::vector<double> rho = {}) {
  mdp.validate();
  const int n = mdp.n_states;
  if (rho.empty()) {
    rho.assign(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
  }
  if (static_cast<int>(rho.size()) != n) {
    throw DimensionError("universal_approximation_check: rho size " +
                         std::to_string(rho.size()) + ", expected " +
                         std::to_string(n));
  }
  for (double p : rho) {
    if (!(p > 0.0)) {
      throw ContractError(
          "universal_approximation_check: rho must be strictly positive on "
          "every state");
    }
  }
  if (test_rewards.empty()) {
    throw ContractError("universal_approximation_check: no test rewards");
  }
  for (const std::vector<double>& r : test_rewards) {
    if (static_cast<int>(r.size()) != n) {
      throw DimensionError(
          "universal_approximation_check: test reward size mismatch");
    }
    if (!all_finite(r)) {
      throw ContractError(
          "universal_approximation_check: non-finite test reward");
    }
  }

  const std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
  const std::vector<double> at_zero = zeta(zero);
  if (at_zero.empty()) {
    throw ContractError(
        "universal_approximation_check: encoder output is empty");
  }
  const int d = static_cast<int>(at_zero.size());
  for (double v : at_zero) {
    if (!(std::fabs(v) <= 1e-12)) {
      throw ContractError(
          "universal_approximation_check: encoder does not vanish at the "
          "zero reward");
    }
  }

  const detail::EncoderTaylor taylor =
      detail::encoder_taylor_at_zero(zeta, n, d, 1e-3);

  // Level-1 features: B1(s) = e_s / rho(s), tabulated.
  Array2 b1(n, n, 0.0);
  for (int s = 0; s < n; ++s) {
    b1.at(s, s) = 1.0 / rho[static_cast<std::size_t>(s)];
  }

  double max_error = 0.0;
  for (const std::vector<double>& r : test_rewards) {
    // z1 = E_rho[r B1], evaluated through the feature table.
    std::vector<double> z1(static_cast<std::size_t>(n), 0.0);
    for (int c = 0; c < n; ++c) {
      double acc = 0.0;
      for (int s = 0; s < n; ++s) {
        acc += rho[static_cast<std::size_t>(s)] *
               r[static_cast<std::size_t>(s)] * b1.at(s, c);
      }
      z1[static_cast<std::size_t>(c)] = acc;
    }

    double z1_sq = 0.0;
    for (double v : z1) z1_sq += v * v;
    const std::vector<double> zeta_z1 = zeta(z1);
    if (static_cast<int>(zeta_z1.size()) != d) {
      throw ContractError("task encoder changed output dimension");
    }

    const std::vector<double> target = zeta(r);
    for (int i = 0; i < d; ++i) {
      // Residual of the second-order Taylor model of component i at z1.
      double lin = 0.0;
      for (int j = 0; j < n; ++j) {
        lin += taylor.grad.at(i, j) * z1[static_cast<std::size_t>(j)];
      }
      double quad = 0.0;
      const Array2& h_i = taylor.hess[static_cast<std::size_t>(i)];
      for (int j = 0; j < n; ++j) {
        double hz = 0.0;
        for (int k = 0; k < n; ++k) {
          hz += h_i.at(j, k) * z1[static_cast<std::size_t>(k)];
        }
        quad += z1[static_cast<std::size_t>(j)] * hz;
      }
      const double residual =
          zeta_z1[static_cast<std::size_t>(i)] - lin - 0.5 * quad;

      // g_i(z1), then level-2 features B2(s, z1)_i = g_i(z1)_s / rho(s).
      std::vector<double> g(static_cast<std::size_t>(n), 0.0);
      for (int j = 0; j < n; ++j) {
        double hz = 0.0;
        for (int k = 0; k < n; ++k) {
          hz += h_i.at(j, k) * z1[static_cast<std::size_t>(k)];
        }
        g[static_cast<std::size_t>(j)] =
            taylor.grad.at(i, j) + 0.5 * hz +
            (z1_sq > 0.0
                 ? (residual / z1_sq) * z1[static_cast<std::size_t>(j)]
                 : 0.0);
      }

      // z2_i = E_rho[r B2(s, z1)_i] through the feature construction.
      double z2 = 0.0;
      for (int s = 0; s < n; ++s) {
        const double b2 =
            g[static_cast<std::size_t>(s)] / rho[static_cast<std::size_t>(s)];
        z2 += rho[static_cast<std::size_t>(s)] *
              r[static_cast<std::size_t>(s)] * b2;
      }
      max_error =
          std::max(max_error,
                   std::fabs(z2 - target[static_cast<std::size_t>(i)]));
    }
  }
  return max_error;
}

}  // namespace fbrl

#endif  // FBRL_TASK_INFERENCE_HPP_
