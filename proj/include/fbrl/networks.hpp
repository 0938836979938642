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
// The three networks of the behavior-foundation model:
//   * ForwardNet / ForwardEnsemble: (state, action, z) -> d features, an
//     ensemble of independently parameterized members with Polyak targets.
//   * BackwardNet: (state, z) -> d features with exact autoregressive
//     masking over K blocks of z (output block i depends on state and
//     z blocks 1..i-1 only) and per-block output renormalization.
//   * PolicyNet: (state, z) -> categorical distribution over actions.
//
// Plus the task-vector normalization schemes: fixed-norm normalize_z and the
// scale-invariant residual autoregressive normalization feeding BackwardNet.

#ifndef FBRL_NETWORKS_HPP_
#define FBRL_NETWORKS_HPP_

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fbrl/array.hpp"
#include "fbrl/autodiff.hpp"
#include "fbrl/common.hpp"
#include "fbrl/mdp.hpp"
#include "fbrl/rng.hpp"

namespace fbrl {

// ---------------------------------------------------------------------------
// Task vectors and their normalizations
// ---------------------------------------------------------------------------

// A task embedding z of dimension d, partitioned into K contiguous blocks.
struct TaskVector {
  std::vector<double> z;
  std::vector<int> block_sizes;

  int d() const { return static_cast<int>(z.size()); }
  int blocks() const { return static_cast<int>(block_sizes.size()); }

  void validate() const {
    if (z.empty() || block_sizes.empty()) {
      throw ContractError("TaskVector: empty");
    }
    int total = 0;
    for (int b : block_sizes) {
      if (b < 1) throw ContractError("TaskVector: block size < 1");
      total += b;
    }
    if (total != d()) {
      throw ContractError("TaskVector: block sizes sum to " +
                          std::to_string(total) + ", dimension is " +
                          std::to_string(d()));
    }
    if (!all_finite(z)) throw ContractError("TaskVector: non-finite entry");
  }
};

// Equal partition of d into K blocks. K must divide d.
inline std::vector<int> make_blocks(int d, int k) {
  if (k < 1 || k > d) {
    throw ContractError("make_blocks: need 1 <= K <= d, got K=" +
                        std::to_string(k) + ", d=" + std::to_string(d));
  }
  if (d % k != 0) {
    throw ContractError("make_blocks: K=" + std::to_string(k) +
                        " does not divide d=" + std::to_string(d) +
                        " (pass explicit block sizes instead)");
  }
  return std::vector<int>(static_cast<std::size_t>(k), d / k);
}

// z * sqrt(d) / ||z||: every task vector the networks consume has norm
// sqrt(d). The zero vector has no direction and is rejected.
inline TaskVector normalize_z(const TaskVector& tv) {
  tv.validate();
  double norm = 0.0;
  for (double v : tv.z) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    throw ContractError("normalize_z: zero task vector (degenerate task)");
  }
  TaskVector out = tv;
  const double factor = std::sqrt(static_cast<double>(tv.d())) / norm;
  for (double& v : out.z) v *= factor;
  return out;
}

// Residual autoregressive normalization:
//   f_r(z)_k = z_k * sqrt(d_1 + ... + d_k) / ||z_{1:k}||.
// Each block is scaled by its own prefix norm, so the map is (a) invariant
// under z -> alpha z for alpha > 0 and (b) causal: block k of the output
// depends only on blocks 1..k of the input. Property (b) is what lets the
// autoregressive task-inference loop fill in blocks one at a time.
inline TaskVector residual_ar_normalize(const TaskVector& tv) {
  tv.validate();
  TaskVector out = tv;
  std::size_t offset = 0;
  double prefix_sq = 0.0;
  int prefix_dims = 0;
  for (int b : tv.block_sizes) {
    for (int i = 0; i < b; ++i) {
      const double v = tv.z[offset + static_cast<std::size_t>(i)];
      prefix_sq += v * v;
    }
    prefix_dims += b;
    if (prefix_sq == 0.0) {
      throw ContractError(
          "residual_ar_normalize: zero leading block (degenerate task)");
    }
    const double factor =
        std::sqrt(static_cast<double>(prefix_dims)) / std::sqrt(prefix_sq);
    for (int i = 0; i < b; ++i) {
      out.z[offset + static_cast<std::size_t>(i)] *= factor;
    }
    offset += static_cast<std::size_t>(b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// State encodings
// ---------------------------------------------------------------------------

enum class StateEncoding { kCoords, kOneHot, kBoth };

inline StateEncoding parse_state_encoding(const std::string& s) {
  if (s == "coords") return StateEncoding::kCoords;
  if (s == "onehot") return StateEncoding::kOneHot;
  if (s == "both") return StateEncoding::kBoth;
  throw ContractError("unknown state encoding '" + s +
                      "' (expected coords|onehot|both)");
}

inline std::string state_encoding_name(StateEncoding e) {
  switch (e) {
    case StateEncoding::kCoords: return "coords";
    case StateEncoding::kOneHot: return "onehot";
    case StateEncoding::kBoth: return "both";
  }
  throw ContractError("unreachable");
}

// One row per state: the network input representation of each state.
inline Array2 state_encoding_matrix(const FiniteMdp& mdp, StateEncoding enc) {
  switch (enc) {
    case StateEncoding::kCoords:
      return mdp.state_features;
    case StateEncoding::kOneHot:
      return Array2::identity(mdp.n_states);
    case StateEncoding::kBoth: {
      Array2 out(mdp.n_states, mdp.state_features.cols + mdp.n_states, 0.0);
      for (int s = 0; s < mdp.n_states; ++s) {
        for (int c = 0; c < mdp.state_features.cols; ++c) {
          out.at(s, c) = mdp.state_features.at(s, c);
        }
        out.at(s, mdp.state_features.cols + s) = 1.0;
      }
      return out;
    }
  }
  throw ContractError("unreachable");
}

// Rows of action one-hots: out[k] = e_{actions[k]}.
inline Array2 one_hot_rows(const std::vector<int>& indices, int width) {
  Array2 out(static_cast<int>(indices.size()), width, 0.0);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const int idx = indices[k];
    if (idx < 0 || idx >= width) {
      throw ContractError("one_hot_rows: index out of range");
    }
    out.at(static_cast<int>(k), idx) = 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for both weights and biases.
inline Parameter init_linear(const std::string& name, int in, int out,
                             Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return Parameter(name, Array2::uniform(in, out, -bound, bound, rng));
}

inline Parameter init_bias(const std::string& name, int in, int out,
                           Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return Parameter(name, Array2::uniform(1, out, -bound, bound, rng));
}

// ---------------------------------------------------------------------------
// Backward network (masked autoregressive)
// ---------------------------------------------------------------------------

// B(s, f_r(z)) -> d features. Two input branches: an unmasked state branch
// (layer norm + tanh) that feeds every block, and a masked (state, z) branch.
// The masked branch and everything downstream of it uses plain activations
// only: layer normalization mixes units within a row, which would leak later
// z blocks into earlier outputs and break the exact autoregressive property.
//
// Masking follows the classic autoregressive-labeling construction. Labels:
//   inputs:  state dims -> 0, z block j (1-based) -> j
//   hidden:  unit u -> floor(u*K/hidden), covering 0..K-1
//   outputs: block i (1-based) -> i-1
// with a connection permitted iff label(src) <= label(dst). Composing layers,
// output block i can only be influenced by z blocks <= i-1. With K=1 every
// hidden label is 0 < 1 = label(z), so all z paths vanish and B is z-free.
struct BackwardNet {
  int d = 0;
  int hidden = 0;
  int state_dim = 0;
  std::vector<int> block_sizes;

  Array2 mask_pre, mask_trunk1, mask_trunk2, mask_out;
  Parameter pre_s_w, pre_s_b;    // state branch
  Parameter pre_sz_w, pre_sz_b;  // masked (state, z) branch
  Parameter trunk1_w, trunk1_b;
  Parameter trunk2_w, trunk2_b;
  Parameter out_w, out_b;

  int blocks() const { return static_cast<int>(block_sizes.size()); }

  std::vector<Parameter*> params() {
    return {&pre_s_w, &pre_s_b, &pre_sz_w, &pre_sz_b, &trunk1_w,
            &trunk1_b, &trunk2_w, &trunk2_b, &out_w,   &out_b};
  }

  // Forward pass over a batch: s_enc is rows x state_dim, z_resid is rows x d
  // and must already be residually normalized. When trainable is false the
  // parameters enter the tape as constants (frozen target evaluation).
  Var forward(Tape& t, Var s_enc, Var z_resid, bool trainable) {
    auto lift = [&](Parameter& p) {
      return trainable ? t.leaf(p) : t.constant(p.value);
    };
    auto lin = [&](Var x, Parameter& w, Parameter& b) {
      return t.add(t.matmul(x, lift(w)), lift(b));
    };
    auto mlin = [&](Var x, Parameter& w, const Array2& m, Parameter& b) {
      return t.add(t.matmul(x, t.mul(lift(w), t.constant(m))), lift(b));
    };
    Var h_s = t.tanh(t.layer_norm_rows(lin(s_enc, pre_s_w, pre_s_b)));
    Var sz = t.concat_cols(s_enc, z_resid);
    Var h_sz = t.tanh(mlin(sz, pre_sz_w, mask_pre, pre_sz_b));
    Var h = t.concat_cols(h_s, h_sz);
    Var h1 = t.relu(mlin(h, trunk1_w, mask_trunk1, trunk1_b));
    Var h2 = t.relu(mlin(h1, trunk2_w, mask_trunk2, trunk2_b));
    Var out = mlin(h2, out_w, mask_out, out_b);
    return t.block_renorm_rows(out, block_sizes);
  }

  // Value-only convenience forward on a scratch tape.
  Array2 forward_value(const Array2& s_enc, const Array2& z_resid) {
    Tape t;
    return t.val(forward(t, t.constant(s_enc), t.constant(z_resid), false));
  }
};

inline BackwardNet build_backward_blocks(std::vector<int> block_sizes,
                                         int hidden, int state_dim, Rng& rng) {
  int d = 0;
  for (int b : block_sizes) {
    if (b < 1) throw ContractError("build_backward: block size < 1");
    d += b;
  }
  const int k = static_cast<int>(block_sizes.size());
  if (k < 1) throw ContractError("build_backward: no blocks");
  if (hidden < k) {
    throw ContractError("build_backward: hidden width " +
                        std::to_string(hidden) + " < K=" + std::to_string(k) +
                        " (each block needs at least one hidden unit)");
  }
  if (state_dim < 1) throw ContractError("build_backward: state_dim < 1");

  BackwardNet net;
  net.d = d;
  net.hidden = hidden;
  net.state_dim = state_dim;
  net.block_sizes = std::move(block_sizes);

  // Autoregressive labels.
  std::vector<int> in_label(static_cast<std::size_t>(state_dim + d), 0);
  {
    int dim = state_dim;
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < net.block_sizes[static_cast<std::size_t>(j)]; ++i) {
        in_label[static_cast<std::size_t>(dim++)] = j + 1;
      }
    }
  }
  std::vector<int> hid_label(static_cast<std::size_t>(hidden), 0);
  for (int u = 0; u < hidden; ++u) {
    hid_label[static_cast<std::size_t>(u)] =
        static_cast<int>(static_cast<long long>(u) * k / hidden);
  }
  std::vector<int> out_label(static_cast<std::size_t>(d), 0);
  {
    int dim = 0;
    for (int i = 0; i < k; ++i) {
      for (int c = 0; c < net.block_sizes[static_cast<std::size_t>(i)]; ++c) {
        out_label[static_cast<std::size_t>(dim++)] = i;
      }
    }
  }
  auto mask_from = [](const std::vector<int>& src,
                      const std::vector<int>& dst) {
    Array2 m(static_cast<int>(src.size()), static_cast<int>(dst.size()), 0.0);
    for (int r = 0; r < m.rows; ++r) {
      for (int c = 0; c < m.cols; ++c) {
        if (src[static_cast<std::size_t>(r)] <=
            dst[static_cast<std::size_t>(c)]) {
          m.at(r, c) = 1.0;
        }
      }
    }
    return m;
  };
  net.mask_pre = mask_from(in_label, hid_label);
  // Trunk input is [state-branch hidden | masked-branch hidden]; the state
  // branch carries label 0 (it never sees z).
  std::vector<int> concat_label(static_cast<std::size_t>(hidden), 0);
  concat_label.insert(concat_label.end(), hid_label.begin(), hid_label.end());
  net.mask_trunk1 = mask_from(concat_label, hid_label);
  net.mask_trunk2 = mask_from(hid_label, hid_label);
  net.mask_out = mask_from(hid_label, out_label);

  net.pre_s_w = init_linear("b.pre_s.w", state_dim, hidden, rng);
  net.pre_s_b = init_bias("b.pre_s.b", state_dim, hidden, rng);
  net.pre_sz_w = init_linear("b.pre_sz.w", state_dim + d, hidden, rng);
  net.pre_sz_b = init_bias("b.pre_sz.b", state_dim + d, hidden, rng);
  net.trunk1_w = init_linear("b.trunk1.w", 2 * hidden, hidden, rng);
  net.trunk1_b = init_bias("b.trunk1.b", 2 * hidden, hidden, rng);
  net.trunk2_w = init_linear("b.trunk2.w", hidden, hidden, rng);
  net.trunk2_b = init_bias("b.trunk2.b", hidden, hidden, rng);
  net.out_w = init_linear("b.out.w", hidden, d, rng);
  net.out_b = init_bias("b.out.b", hidden, d, rng);
  return net;
}

inline BackwardNet build_backward(int d, int k, int hidden, int state_dim,
                                  Rng& rng) {
  return build_backward_blocks(make_blocks(d, k), hidden, state_dim, rng);
}

// Blockwise autoregressive evaluation of B at a single state: fill block 1
// from B_1(s) (which sees no z), then block k from B_k(s, f_r(prefix)) for
// k = 2..K. Because output block k never looks at z blocks >= k, the
// placeholder ones in the not-yet-filled tail never influence anything, and
// the result is a fixed point of z -> blocks of B(s, f_r(z)).
inline std::vector<double> blockwise_backward_fill(BackwardNet& net,
                                                   const Array2& s_enc_row) {
  if (s_enc_row.rows != 1) {
    throw DimensionError("blockwise_backward_fill: expected one state row");
  }
  TaskVector z;
  z.block_sizes = net.block_sizes;
  z.z.assign(static_cast<std::size_t>(net.d), 1.0);
  std::size_t offset = 0;
  for (int b : net.block_sizes) {
    const Array2 out = net.forward_value(
        s_enc_row, Array2::tile_rows(residual_ar_normalize(z).z, 1));
    for (int c = 0; c < b; ++c) {
      z.z[offset + static_cast<std::size_t>(c)] =
          out.at(0, static_cast<int>(offset) + c);
    }
    offset += static_cast<std::size_t>(b);
  }
  return z.z;
}

// ---------------------------------------------------------------------------
// Forward network and ensemble
// ---------------------------------------------------------------------------

// One ensemble member: F(s, a, z) -> d features. Two preprocessing branches
// (state+action, state+z), each layer norm + tanh, then a ReLU trunk.
struct ForwardNet {
  int d = 0;
  int hidden = 0;
  int state_dim = 0;
  int n_actions = 0;

  Parameter pre_sa_w, pre_sa_b;
  Parameter pre_sz_w, pre_sz_b;
  Parameter trunk1_w, trunk1_b;
  Parameter trunk2_w, trunk2_b;
  Parameter out_w, out_b;

  std::vector<Parameter*> params() {
    return {&pre_sa_w, &pre_sa_b, &pre_sz_w, &pre_sz_b, &trunk1_w,
            &trunk1_b, &trunk2_w, &trunk2_b, &out_w,    &out_b};
  }

  // s_enc: rows x state_dim; a_onehot: rows x n_actions; z: rows x d
  // (fixed-norm normalized).
  Var forward(Tape& t, Var s_enc, Var a_onehot, Var z, bool trainable) {
    auto lift = [&](Parameter& p) {
      return trainable ? t.leaf(p) : t.constant(p.value);
    };
    auto lin = [&](Var x, Parameter& w, Parameter& b) {
      return t.add(t.matmul(x, lift(w)), lift(b));
    };
    Var sa = t.concat_cols(s_enc, a_onehot);
    Var h_sa = t.tanh(t.layer_norm_rows(lin(sa, pre_sa_w, pre_sa_b)));
    Var sz = t.concat_cols(s_enc, z);
    Var h_sz = t.tanh(t.layer_norm_rows(lin(sz, pre_sz_w, pre_sz_b)));
    Var h = t.concat_cols(h_sa, h_sz);
    Var h1 = t.relu(lin(h, trunk1_w, trunk1_b));
    Var h2 = t.relu(lin(h1, trunk2_w, trunk2_b));
    return lin(h2, out_w, out_b);
  }

  Array2 forward_value(const Array2& s_enc, const Array2& a_onehot,
                       const Array2& z) {
    Tape t;
    return t.val(forward(t, t.constant(s_enc), t.constant(a_onehot),
                         t.constant(z), false));
  }
};

inline ForwardNet build_forward(const std::string& prefix, int d, int hidden,
                                int state_dim, int n_actions, Rng& rng) {
  if (d < 1 || hidden < 1 || state_dim < 1 || n_actions < 1) {
    throw ContractError("build_forward: all dimensions must be >= 1");
  }
  ForwardNet net;
  net.d = d;
  net.hidden = hidden;
  net.state_dim = state_dim;
  net.n_actions = n_actions;
  net.pre_sa_w = init_linear(prefix + ".pre_sa.w", state_dim + n_actions,
                             hidden, rng);
  net.pre_sa_b = init_bias(prefix + ".pre_sa.b", state_dim + n_actions,
                           hidden, rng);
  net.pre_sz_w = init_linear(prefix + ".pre_sz.w", state_dim + d, hidden, rng);
  net.pre_sz_b = init_bias(prefix + ".pre_sz.b", state_dim + d, hidden, rng);
  net.trunk1_w = init_linear(prefix + ".trunk1.w", 2 * hidden, hidden, rng);
  net.trunk1_b = init_bias(prefix + ".trunk1.b", 2 * hidden, hidden, rng);
  net.trunk2_w = init_linear(prefix + ".trunk2.w", hidden, hidden, rng);
  net.trunk2_b = init_bias(prefix + ".trunk2.b", hidden, hidden, rng);
  net.out_w = init_linear(prefix + ".out.w", hidden, d, rng);
  net.out_b = init_bias(prefix + ".out.b", hidden, d, rng);
  return net;
}

// M independently parameterized members plus Polyak target copies.
struct ForwardEnsemble {
  std::vector<ForwardNet> members;
  std::vector<ForwardNet> targets;

  int size() const { return static_cast<int>(members.size()); }

  std::vector<Parameter*> online_params() {
    std::vector<Parameter*> out;
    for (ForwardNet& m : members) {
      for (Parameter* p : m.params()) out.push_back(p);
    }
    return out;
  }
};

inline ForwardEnsemble build_forward_ensemble(int m, int d, int hidden,
                                              int state_dim, int n_actions,
                                              Rng& rng) {
  if (m < 1) throw ContractError("build_forward_ensemble: M must be >= 1");
  ForwardEnsemble ens;
  for (int k = 0; k < m; ++k) {
    ens.members.push_back(build_forward("f" + std::to_string(k), d, hidden,
                                        state_dim, n_actions, rng));
  }
  ens.targets = ens.members;  // start equal; Polyak keeps them trailing
  return ens;
}

// ---------------------------------------------------------------------------
// Policy network
// ---------------------------------------------------------------------------

// pi(a | s, z): categorical head over n_actions.
struct PolicyNet {
  int d = 0;
  int hidden = 0;
  int state_dim = 0;
  int n_actions = 0;

  Parameter pre_w, pre_b;
  Parameter trunk_w, trunk_b;
  Parameter out_w, out_b;

  std::vector<Parameter*> params() {
    return {&pre_w, &pre_b, &trunk_w, &trunk_b, &out_w, &out_b};
  }

  Var forward_logits(Tape& t, Var s_enc, Var z, bool trainable) {
    auto lift = [&](Parameter& p) {
      return trainable ? t.leaf(p) : t.constant(p.value);
    };
    auto lin = [&](Var x, Parameter& w, Parameter& b) {
      return t.add(t.matmul(x, lift(w)), lift(b));
    };
    Var sz = t.concat_cols(s_enc, z);
    Var h = t.tanh(t.layer_norm_rows(lin(sz, pre_w, pre_b)));
    Var h1 = t.relu(lin(h, trunk_w, trunk_b));
    return lin(h1, out_w, out_b);
  }

  // Action probabilities, one row per input row.
  Array2 distribution(const Array2& s_enc, const Array2& z) {
    Tape t;
    Var logits =
        forward_logits(t, t.constant(s_enc), t.constant(z), false);
    return t.val(t.softmax_rows(logits));
  }
};

inline PolicyNet build_policy(int d, int hidden, int state_dim, int n_actions,
                              Rng& rng) {
  if (d < 1 || hidden < 1 || state_dim < 1 || n_actions < 1) {
    throw ContractError("build_policy: all dimensions must be >= 1");
  }
  PolicyNet net;
  net.d = d;
  net.hidden = hidden;
  net.state_dim = state_dim;
  net.n_actions = n_actions;
  net.pre_w = init_linear("pi.pre.w", state_dim + d, hidden, rng);
  net.pre_b = init_bias("pi.pre.b", state_dim + d, hidden, rng);
  net.trunk_w = init_linear("pi.trunk.w", hidden, hidden, rng);
  net.trunk_b = init_bias("pi.trunk.b", hidden, hidden, rng);
  net.out_w = init_linear("pi.out.w", hidden, n_actions, rng);
  net.out_b = init_bias("pi.out.b", hidden, n_actions, rng);
  return net;
}

// ---------------------------------------------------------------------------
// Polyak averaging across whole networks
// ---------------------------------------------------------------------------

template <typename Net>
void polyak_update_net(Net& target, Net& online, double zeta) {
  auto tp = target.params();
  auto op = online.params();
  if (tp.size() != op.size()) {
    throw ContractError("polyak_update_net: parameter count mismatch");
  }
  for (std::size_t i = 0; i < tp.size(); ++i) {
    polyak_update(*tp[i], *op[i], zeta);
  }
}

}  // namespace fbrl

#endif  // FBRL_NETWORKS_HPP_
