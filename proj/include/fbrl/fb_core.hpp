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

#ifndef FBRL_FB_CORE_HPP_
#define FBRL_FB_CORE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fbrl/array.hpp"
#include "fbrl/autodiff.hpp"
#include "fbrl/common.hpp"
#include "fbrl/dataset.hpp"
#include "fbrl/mdp.hpp"
#include "fbrl/networks.hpp"
#include "fbrl/policy_opt.hpp"
#include "fbrl/rng.hpp"

namespace fbrl {

// ---------------------------------------------------------------------------
// Training modes
// ---------------------------------------------------------------------------

// Which agent is trained.
//   kVanilla: one task vector per transition, z-free backward net (one z
//             block), greedy critic-following actor.
//   kAw:      same representation learning as kVanilla, but the actor is
//             advantage-weighted regression onto dataset actions.
//   kAware:   grouped batches (all transitions in a group share a task
//             vector), autoregressive z-conditioned backward net, and the
//             advantage-weighted actor.
enum class Variant { kVanilla, kAw, kAware };

// Whether the double sum over (sample, integration-sample) pairs in the
// measure losses skips the matched pair (j == k). Exclusive pairs follow the
// grouped-batch training rule verbatim; inclusive pairs make the minibatch
// gradient an unbiased estimate of the population one (the j == k terms are
// what the population loss averages too when the integration sample is drawn
// independently).
enum class PairMode { kExclusive, kInclusive };

// Where the integration states (the B side of the pair sums) come from:
// the group's own next states (kBatch, verbatim rule) or an independent
// draw from the dataset's next-state marginal (kRho).
enum class IntegrationMode { kBatch, kRho };

// The online features inside the temporal-difference residual: one residual
// per ensemble member (kPerMember), or the ensemble mean in every member's
// residual (kEnsembleMean, the alternative reading in which all members see
// the averaged online features).
enum class OnlineTerm { kPerMember, kEnsembleMean };

// Actor regression weights: improved importance weights u = w/(1-w)
// (kImproved) or the plain softmax weights (kPlain).
enum class AwWeighting { kImproved, kPlain };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kVanilla: return "vanilla";
    case Variant::kAw: return "aw";
    case Variant::kAware: return "aware";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "vanilla") return Variant::kVanilla;
  if (s == "aw") return Variant::kAw;
  if (s == "aware") return Variant::kAware;
  throw ContractError("unknown variant '" + s +
                      "' (expected vanilla, aw or aware)");
}

inline const char* pair_mode_name(PairMode m) {
  return m == PairMode::kExclusive ? "exclusive" : "inclusive";
}

inline PairMode parse_pair_mode(const std::string& s) {
  if (s == "exclusive") return PairMode::kExclusive;
  if (s == "inclusive") return PairMode::kInclusive;
  throw ContractError("unknown pair mode '" + s +
                      "' (expected exclusive or inclusive)");
}

inline const char* integration_mode_name(IntegrationMode m) {
  return m == IntegrationMode::kBatch ? "batch" : "rho";
}

inline IntegrationMode parse_integration_mode(const std::string& s) {
  if (s == "batch") return IntegrationMode::kBatch;
  if (s == "rho") return IntegrationMode::kRho;
  throw ContractError("unknown integration mode '" + s +
                      "' (expected batch or rho)");
}

inline const char* online_term_name(OnlineTerm m) {
  return m == OnlineTerm::kPerMember ? "per_member" : "ensemble_mean";
}

inline OnlineTerm parse_online_term(const std::string& s) {
  if (s == "per_member") return OnlineTerm::kPerMember;
  if (s == "ensemble_mean") return OnlineTerm::kEnsembleMean;
  throw ContractError("unknown online term mode '" + s +
                      "' (expected per_member or ensemble_mean)");
}

inline const char* aw_weighting_name(AwWeighting m) {
  return m == AwWeighting::kImproved ? "improved" : "plain";
}

inline AwWeighting parse_aw_weighting(const std::string& s) {
  if (s == "improved") return AwWeighting::kImproved;
  if (s == "plain") return AwWeighting::kPlain;
  throw ContractError("unknown actor weighting '" + s +
                      "' (expected improved or plain)");
}

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------

struct TrainConfig {
  int d = 16;             // task-vector dimension
  int k = 4;              // autoregressive blocks (k = 1: z-free backward net)
  double gamma = 0.95;    // discount used by the temporal-difference target
  double tau_mix = 0.5;   // probability of dataset-anchored task draws
  double beta = 1.0;      // advantage temperature
  double lr = 3e-4;
  double polyak_zeta = 0.99;  // kept fraction of the target nets per step
  double lambda_ortho = 1.0;  // weight of the feature-orthonormality loss
  int batch_i = 16;           // groups per step (tasks)
  int batch_j = 4;            // transitions per group
  int ensemble_m = 2;         // forward-net ensemble size
  long long steps = 1000;
  std::uint64_t seed = 1;
  Variant variant = Variant::kAware;
  int es_samples = 32;  // policy samples per evaluation-time action choice
  int hidden = 64;
  StateEncoding encoding = StateEncoding::kBoth;
  PairMode fb_pairs = PairMode::kExclusive;
  IntegrationMode fb_integration = IntegrationMode::kBatch;
  OnlineTerm fb_online_term = OnlineTerm::kPerMember;
  AwWeighting aw_weighting = AwWeighting::kImproved;
  bool adv_literal_sum = false;  // keep the un-averaged over-members Q sum
  bool aw_fresh_z = false;  // actor sees fresh per-sample z, not the group's
  int z_cache_interval = 1;  // steps between re-draws of the task vectors
  long long log_interval = 100;

  std::vector<int> blocks() const { return make_blocks(d, k); }

  void validate() const {
    if (d < 1) throw ContractError("config: d must be >= 1");
    if (k < 1 || k > d || d % k != 0) {
      throw ContractError("config: k must divide d, got d=" +
                          std::to_string(d) + " k=" + std::to_string(k));
    }
    if (!(gamma > 0.0) || !(gamma < 1.0)) {
      throw ContractError("config: gamma must be in (0,1), got " +
                          format_g17(gamma));
    }
    if (!(tau_mix >= 0.0) || !(tau_mix <= 1.0)) {
      throw ContractError("config: tau_mix must be in [0,1]");
    }
    if (!(beta > 0.0)) throw ContractError("config: beta must be > 0");
    if (!(lr > 0.0)) throw ContractError("config: lr must be > 0");
    if (!(polyak_zeta >= 0.0) || !(polyak_zeta <= 1.0)) {
      throw ContractError("config: polyak_zeta must be in [0,1]");
    }
    if (!(lambda_ortho >= 0.0)) {
      throw ContractError("config: lambda_ortho must be >= 0");
    }
    if (batch_i < 1 || batch_j < 1) {
      throw ContractError("config: batch_i and batch_j must be >= 1");
    }
    if (batch_i * batch_j < 2) {
      throw ContractError("config: batch must hold at least two transitions");
    }
    if (variant == Variant::kAware && fb_pairs == PairMode::kExclusive &&
        batch_j < 2) {
      throw ContractError(
          "config: grouped training with exclusive pairs needs batch_j >= 2");
    }
    if (variant != Variant::kAware && k != 1) {
      throw ContractError(
          "config: per-transition task vectors require k = 1 (a "
          "z-conditioned backward net needs grouped batches; use the aware "
          "variant)");
    }
    if (ensemble_m < 1) throw ContractError("config: ensemble_m must be >= 1");
    if (steps < 0) throw ContractError("config: steps must be >= 0");
    if (es_samples < 1) throw ContractError("config: es_samples must be >= 1");
    if (hidden < k) {
      throw ContractError("config: hidden must be >= k for the masked trunk");
    }
    if (z_cache_interval < 1) {
      throw ContractError("config: z_cache_interval must be >= 1");
    }
    if (log_interval < 1) {
      throw ContractError("config: log_interval must be >= 1");
    }
  }
};

namespace detail {

inline std::uint64_t parse_u64(const std::string& s) {
  if (s.empty()) throw ContractError("expected unsigned integer, got ''");
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) {
    throw ContractError("not an unsigned integer: '" + s + "'");
  }
  return static_cast<std::uint64_t>(v);
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ContractError("not a boolean: '" + s + "' (expected true or false)");
}

}  // namespace detail

// Applies one "key value" setting. Unknown keys are contract errors so that
// misspelled configuration never silently trains with defaults.
inline void apply_config_entry(TrainConfig& cfg, const std::string& key,
                               const std::string& value) {
  const char* what = key.c_str();
  auto as_int = [&] { return static_cast<int>(parse_int(value, what)); };
  if (key == "d") cfg.d = as_int();
  else if (key == "k") cfg.k = as_int();
  else if (key == "gamma") cfg.gamma = parse_double(value, what);
  else if (key == "tau_mix") cfg.tau_mix = parse_double(value, what);
  else if (key == "beta") cfg.beta = parse_double(value, what);
  else if (key == "lr") cfg.lr = parse_double(value, what);
  else if (key == "polyak_zeta") cfg.polyak_zeta = parse_double(value, what);
  else if (key == "lambda_ortho") cfg.lambda_ortho = parse_double(value, what);
  else if (key == "batch_i") cfg.batch_i = as_int();
  else if (key == "batch_j") cfg.batch_j = as_int();
  else if (key == "ensemble_m") cfg.ensemble_m = as_int();
  else if (key == "steps") cfg.steps = parse_int(value, what);
  else if (key == "seed") cfg.seed = detail::parse_u64(value);
  else if (key == "variant") cfg.variant = parse_variant(value);
  else if (key == "es_samples") cfg.es_samples = as_int();
  else if (key == "hidden") cfg.hidden = as_int();
  else if (key == "encoding") cfg.encoding = parse_state_encoding(value);
  else if (key == "fb_pairs") cfg.fb_pairs = parse_pair_mode(value);
  else if (key == "fb_integration")
    cfg.fb_integration = parse_integration_mode(value);
  else if (key == "fb_online_term")
    cfg.fb_online_term = parse_online_term(value);
  else if (key == "aw_weighting")
    cfg.aw_weighting = parse_aw_weighting(value);
  else if (key == "adv_literal_sum")
    cfg.adv_literal_sum = detail::parse_bool(value);
  else if (key == "aw_fresh_z") cfg.aw_fresh_z = detail::parse_bool(value);
  else if (key == "z_cache_interval") cfg.z_cache_interval = as_int();
  else if (key == "log_interval") cfg.log_interval = parse_int(value, what);
  else throw ContractError("unknown config key '" + key + "'");
}

inline std::map<std::string, std::string> train_config_to_map(
    const TrainConfig& cfg) {
  std::map<std::string, std::string> m;
  m["d"] = std::to_string(cfg.d);
  m["k"] = std::to_string(cfg.k);
  m["gamma"] = format_g17(cfg.gamma);
  m["tau_mix"] = format_g17(cfg.tau_mix);
  m["beta"] = format_g17(cfg.beta);
  m["lr"] = format_g17(cfg.lr);
  m["polyak_zeta"] = format_g17(cfg.polyak_zeta);
  m["lambda_ortho"] = format_g17(cfg.lambda_ortho);
  m["batch_i"] = std::to_string(cfg.batch_i);
  m["batch_j"] = std::to_string(cfg.batch_j);
  m["ensemble_m"] = std::to_string(cfg.ensemble_m);
  m["steps"] = std::to_string(cfg.steps);
  m["seed"] = std::to_string(cfg.seed);
  m["variant"] = variant_name(cfg.variant);
  m["es_samples"] = std::to_string(cfg.es_samples);
  m["hidden"] = std::to_string(cfg.hidden);
  m["encoding"] = state_encoding_name(cfg.encoding);
  m["fb_pairs"] = pair_mode_name(cfg.fb_pairs);
  m["fb_integration"] = integration_mode_name(cfg.fb_integration);
  m["fb_online_term"] = online_term_name(cfg.fb_online_term);
  m["aw_weighting"] = aw_weighting_name(cfg.aw_weighting);
  m["adv_literal_sum"] = cfg.adv_literal_sum ? "true" : "false";
  m["aw_fresh_z"] = cfg.aw_fresh_z ? "true" : "false";
  m["z_cache_interval"] = std::to_string(cfg.z_cache_interval);
  m["log_interval"] = std::to_string(cfg.log_interval);
  return m;
}

inline TrainConfig train_config_from_map(
    const std::map<std::string, std::string>& m) {
  TrainConfig cfg;
  for (const auto& [key, value] : m) apply_config_entry(cfg, key, value);
  return cfg;
}

// ---------------------------------------------------------------------------
// Task-vector sampling
// ---------------------------------------------------------------------------

// One task vector from the training mixture: with probability 1 - tau_mix an
// isotropic Gaussian draw, otherwise the blockwise fill-in of the backward
// net at a state drawn uniformly from `anchor_states` (the dataset's
// next-state pool, so anchors follow the dataset state marginal). Either way
// the result is rescaled to norm sqrt(d). The mixture branch always consumes
// exactly one uniform draw first, so sampling stays reproducible across
// tau_mix values.
inline TaskVector sample_z(Rng& rng, BackwardNet& b_net,
                           const Array2& state_enc,
                           const std::vector<int>& anchor_states,
                           double tau_mix) {
  if (!(tau_mix >= 0.0) || !(tau_mix <= 1.0)) {
    throw ContractError("sample_z: tau_mix must be in [0,1]");
  }
  TaskVector z;
  z.block_sizes = b_net.block_sizes;
  const bool anchored = rng.uniform() < tau_mix;
  if (anchored) {
    if (anchor_states.empty()) {
      throw ContractError("sample_z: no anchor states for dataset draws");
    }
    const int s = anchor_states[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(anchor_states.size())))];
    if (s < 0 || s >= state_enc.rows) {
      throw ContractError("sample_z: anchor state out of range");
    }
    Array2 row(1, state_enc.cols, 0.0);
    for (int c = 0; c < state_enc.cols; ++c) row.at(0, c) = state_enc.at(s, c);
    z.z = blockwise_backward_fill(b_net, row);
  } else {
    z.z.assign(static_cast<std::size_t>(b_net.d), 0.0);
    for (double& v : z.z) v = rng.normal();
  }
  return normalize_z(z);
}

// ---------------------------------------------------------------------------
// Loss kernels
// ---------------------------------------------------------------------------

namespace detail {

inline Array2 offdiag_mask(int n) {
  Array2 m(n, n, 1.0);
  for (int i = 0; i < n; ++i) m.at(i, i) = 0.0;
  return m;
}

}  // namespace detail

// Unscaled building blocks of the measure-matching loss for one group of
// rows. All feature matrices are laid out one row per sample:
//   f_online[m]   : J x d   online features of member m at (s_j, a_j, z)
//   f_target_mean : J x d   mean over target members at (s'_j, a'_j, z)
//   b_int         : Jint x d online backward features at integration states
//   b_int_target  : Jint x d target backward features at the same states
//   b_diag        : J x d   online backward features at the rows' own next
//                           states (the attraction term)
// Terms produced:
//   quad = sum_m sum_(j,k) (f_m[j] . b_int[k] - gamma f_target_mean[j] .
//          b_int_target[k])^2 over the selected pairs
//   diag = sum_m sum_j f_m[j] . b_diag[j]
// The caller owns stop-gradients (pass targets as constants) and the
// 1/(2 G J P) and 1/(G J) normalizations. Exclusive pairs require Jint == J
// because skipping j == k is only meaningful when integration states are the
// rows' own next states.
struct FbKernelTerms {
  Var quad;
  Var diag;
  int pairs_per_row = 0;
};

inline FbKernelTerms fb_pair_kernel(Tape& t, const std::vector<Var>& f_online,
                                    Var f_target_mean, Var b_int,
                                    Var b_int_target, Var b_diag, double gamma,
                                    PairMode pairs, OnlineTerm online_term) {
  if (f_online.empty()) throw ContractError("fb_pair_kernel: empty ensemble");
  const int j_rows = t.val(f_online[0]).rows;
  const int j_int = t.val(b_int).rows;
  if (pairs == PairMode::kExclusive && j_int != j_rows) {
    throw ContractError(
        "fb_pair_kernel: exclusive pairs need matched integration rows");
  }
  if (pairs == PairMode::kExclusive && j_rows < 2) {
    throw ContractError("fb_pair_kernel: exclusive pairs need >= 2 rows");
  }

  // gamma * mean-target features against target integration features; the
  // whole block is built from constants, so it carries no gradient.
  Var h = t.scale(t.matmul(f_target_mean, t.transpose(b_int_target)), gamma);

  Var online_mean;
  if (online_term == OnlineTerm::kEnsembleMean) {
    online_mean = f_online[0];
    for (std::size_t m = 1; m < f_online.size(); ++m) {
      online_mean = t.add(online_mean, f_online[m]);
    }
    online_mean =
        t.scale(online_mean, 1.0 / static_cast<double>(f_online.size()));
  }

  FbKernelTerms out;
  out.pairs_per_row = pairs == PairMode::kExclusive ? j_rows - 1 : j_int;
  const Array2 mask = detail::offdiag_mask(j_rows);
  bool first = true;
  for (std::size_t m = 0; m < f_online.size(); ++m) {
    Var rows =
        online_term == OnlineTerm::kEnsembleMean ? online_mean : f_online[m];
    Var g = t.matmul(rows, t.transpose(b_int));
    Var sq = t.square(t.sub(g, h));
    Var quad_m = pairs == PairMode::kExclusive
                     ? t.sum_all(t.mul(sq, t.constant(mask)))
                     : t.sum_all(sq);
    Var diag_m = t.sum_all(t.mul(f_online[m], b_diag));
    if (first) {
      out.quad = quad_m;
      out.diag = diag_m;
      first = false;
    } else {
      out.quad = t.add(out.quad, quad_m);
      out.diag = t.add(out.diag, diag_m);
    }
  }
  return out;
}

// Unscaled building blocks of the feature-orthonormality loss over one group
// of backward feature rows (J x d):
//   quad = sum over selected pairs (b[j] . b[k])^2
//   diag = sum_j ||b[j]||^2
// Same pair conventions as the measure loss; no stop-gradients anywhere.
struct OrthoKernelTerms {
  Var quad;
  Var diag;
  int pairs_per_row = 0;
};

inline OrthoKernelTerms ortho_pair_kernel(Tape& t, Var b, PairMode pairs) {
  const int j_rows = t.val(b).rows;
  if (pairs == PairMode::kExclusive && j_rows < 2) {
    throw ContractError("ortho_pair_kernel: exclusive pairs need >= 2 rows");
  }
  Var g = t.matmul(b, t.transpose(b));
  OrthoKernelTerms out;
  out.pairs_per_row = pairs == PairMode::kExclusive ? j_rows - 1 : j_rows;
  if (pairs == PairMode::kExclusive) {
    out.quad =
        t.sum_all(t.mul(t.square(g), t.constant(detail::offdiag_mask(j_rows))));
  } else {
    out.quad = t.sum_all(t.square(g));
  }
  out.diag = t.trace(g);
  return out;
}

// ---------------------------------------------------------------------------
// Model bundle
// ---------------------------------------------------------------------------

// Everything a trained agent needs at inference time, plus enough metadata to
// reproduce table-level analyses. The table methods expect the final task
// vector (already at norm sqrt(d), as produced by sampling or inference) and
// apply the residual block normalization internally where the backward net
// needs it.
struct FbModel {
  TrainConfig cfg;
  int n_states = 0;
  int n_actions = 0;
  int state_dim = 0;
  Array2 state_enc;                // n_states x state_dim
  std::vector<double> rho;         // dataset next-state distribution
  std::vector<int> anchor_states;  // dataset next-state pool for task draws
  std::string mdp_id;
  ForwardEnsemble f;
  BackwardNet b;
  BackwardNet b_target;
  PolicyNet pi;

  int d() const { return cfg.d; }
  double gamma() const { return cfg.gamma; }
  const std::vector<int>& block_sizes() const { return b.block_sizes; }

  std::vector<Parameter*> trainable_params() {
    std::vector<Parameter*> out = f.online_params();
    for (Parameter* p : b.params()) out.push_back(p);
    for (Parameter* p : pi.params()) out.push_back(p);
    return out;
  }

  void check_z(const TaskVector& z) const {
    z.validate();
    if (z.d() != cfg.d) {
      throw DimensionError("task vector has dimension " +
                           std::to_string(z.d()) + ", model expects " +
                           std::to_string(cfg.d));
    }
  }

  Array2 z_rows(const TaskVector& z, int rows) const {
    return Array2::tile_rows(z.z, rows);
  }

  // B(s, f_r(z)) for every state, one row per state.
  Array2 backward_table(const TaskVector& z) {
    check_z(z);
    const TaskVector zr = residual_ar_normalize(z);
    return b.forward_value(state_enc, Array2::tile_rows(zr.z, n_states));
  }

  EnsembleQTables q_tables(const TaskVector& z) {
    check_z(z);
    return ensemble_q_tables(f, state_enc, z_rows(z, n_states));
  }

  Array2 q_mean_table(const TaskVector& z) { return q_tables(z).mean; }
  Array2 q_min_table(const TaskVector& z) { return q_tables(z).min; }

  // pi(a | s, z) for every state, one row per state.
  Array2 policy_table(const TaskVector& z) {
    check_z(z);
    return pi.distribution(state_enc, z_rows(z, n_states));
  }

  // One task vector from the training distribution.
  TaskVector draw_z(Rng& rng) {
    return sample_z(rng, b, state_enc, anchor_states, cfg.tau_mix);
  }
};

// Fresh networks and metadata for a dataset/environment pair; no training.
inline FbModel init_model(const TrainConfig& cfg, const OfflineDataset& ds,
                          const FiniteMdp& mdp) {
  cfg.validate();
  ds.validate();
  mdp.validate();
  if (ds.n_states != mdp.n_states || ds.n_actions != mdp.n_actions) {
    throw ContractError("dataset and environment disagree on state/action "
                        "counts");
  }
  if (ds.transitions.empty()) {
    throw ContractError("cannot initialize a model from an empty dataset");
  }

  FbModel model;
  model.cfg = cfg;
  model.n_states = mdp.n_states;
  model.n_actions = mdp.n_actions;
  model.state_enc = state_encoding_matrix(mdp, cfg.encoding);
  model.state_dim = model.state_enc.cols;
  model.rho = ds.rho;
  model.anchor_states.reserve(ds.transitions.size());
  for (const Transition& t : ds.transitions) {
    model.anchor_states.push_back(t.s_next);
  }
  model.mdp_id = mdp.id;

  Rng net_rng = Rng(cfg.seed).split(0);
  model.f = build_forward_ensemble(cfg.ensemble_m, cfg.d, cfg.hidden,
                                   model.state_dim, mdp.n_actions, net_rng);
  model.b = build_backward_blocks(cfg.blocks(), cfg.hidden, model.state_dim,
                                  net_rng);
  model.b_target = model.b;
  model.pi = build_policy(cfg.d, cfg.hidden, model.state_dim, mdp.n_actions,
                          net_rng);
  return model;
}

// ---------------------------------------------------------------------------
// Step report
// ---------------------------------------------------------------------------

struct FbLossRow {
  long long step = 0;
  double fb_loss = 0.0;      // fb_offdiag + fb_diag
  double fb_offdiag = 0.0;   // scaled quadratic (repulsion) term
  double fb_diag = 0.0;      // scaled attraction term (enters negatively)
  double ortho_loss = 0.0;   // scaled, before the lambda_ortho weight
  double actor_loss = 0.0;
  int aw_clamped = 0;        // actor samples that hit the log-prob floor
};

inline std::string loss_report_csv(const std::vector<FbLossRow>& rows) {
  std::string out =
      "step,fb_loss,fb_offdiag,fb_diag,ortho_loss,actor_loss,aw_clamped\n";
  for (const FbLossRow& r : rows) {
    out += std::to_string(r.step);
    out += ',';
    out += format_g17(r.fb_loss);
    out += ',';
    out += format_g17(r.fb_offdiag);
    out += ',';
    out += format_g17(r.fb_diag);
    out += ',';
    out += format_g17(r.ortho_loss);
    out += ',';
    out += format_g17(r.actor_loss);
    out += ',';
    out += std::to_string(r.aw_clamped);
    out += '\n';
  }
  return out;
}

inline void write_loss_csv(const std::string& path,
                           const std::vector<FbLossRow>& rows) {
  write_text_file(path, loss_report_csv(rows));
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace detail {

inline Array2 gather_enc(const Array2& state_enc, const std::vector<int>& s) {
  Array2 out(static_cast<int>(s.size()), state_enc.cols, 0.0);
  for (int r = 0; r < out.rows; ++r) {
    const int idx = s[static_cast<std::size_t>(r)];
    if (idx < 0 || idx >= state_enc.rows) {
      throw ContractError("state index out of range in batch");
    }
    for (int c = 0; c < state_enc.cols; ++c) {
      out.at(r, c) = state_enc.at(idx, c);
    }
  }
  return out;
}

inline Array2 slice_rows(const Array2& a, int r0, int r1) {
  Array2 out(r1 - r0, a.cols, 0.0);
  for (int r = r0; r < r1; ++r) {
    for (int c = 0; c < a.cols; ++c) out.at(r - r0, c) = a.at(r, c);
  }
  return out;
}

// Actor regression weights, with the collapsed-importance-weight limit
// handled explicitly: when one softmax weight rounds to 1, the improved
// weights' limit is a point mass on that sample.
inline std::vector<double> actor_weights(const std::vector<double>& adv,
                                         double beta, AwWeighting mode) {
  std::vector<double> w = wis_weights(adv, beta);
  if (mode == AwWeighting::kPlain) return w;
  double wmax = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > wmax) {
      wmax = w[i];
      arg = i;
    }
  }
  if (wmax >= 1.0 - 1e-12) {
    std::vector<double> point(w.size(), 0.0);
    point[arg] = 1.0;
    return point;
  }
  return iwis_from_wis(w);
}

}  // namespace detail

struct TrainResult {
  FbModel model;
  std::vector<FbLossRow> report;
};

using TrainCallback = std::function<void(FbModel&, const FbLossRow&)>;

// Offline training loop. Deterministic per (config, dataset): all randomness
// flows from cfg.seed through fixed named streams, consumed in a fixed order
// each step (batch indices, task draws, next actions, actor task draws).
// Throws NumericError with the step index if any loss goes non-finite or the
// measure loss exceeds the divergence bound.
inline TrainResult train(const TrainConfig& cfg, const OfflineDataset& ds,
                         const FiniteMdp& mdp,
                         const TrainCallback& on_log = {}) {
  TrainResult result;
  result.model = init_model(cfg, ds, mdp);
  FbModel& model = result.model;

  constexpr double kDivergenceBound = 1e6;
  const bool grouped = cfg.variant == Variant::kAware;
  const int n_rows = cfg.batch_i * cfg.batch_j;
  const int n_groups = grouped ? cfg.batch_i : 1;
  const int group_rows = grouped ? cfg.batch_j : n_rows;
  const int n_z = grouped ? cfg.batch_i : n_rows;
  const double inv_members = 1.0 / static_cast<double>(cfg.ensemble_m);

  Rng batch_rng = Rng(cfg.seed).split(1);
  Rng z_rng = Rng(cfg.seed).split(2);
  Rng action_rng = Rng(cfg.seed).split(3);

  std::vector<Parameter*> params = model.trainable_params();
  std::vector<TaskVector> z_cache;
  result.report.reserve(static_cast<std::size_t>(cfg.steps));

  for (long long step = 0; step < cfg.steps; ++step) {
    // -- sample batch and tasks --
    const Minibatch mb =
        sample_minibatch(ds, cfg.batch_i, cfg.batch_j, batch_rng);

    if (z_cache.empty() || step % cfg.z_cache_interval == 0) {
      z_cache.clear();
      for (int i = 0; i < n_z; ++i) {
        z_cache.push_back(model.draw_z(z_rng));
      }
    }

    std::vector<int> s_idx(static_cast<std::size_t>(n_rows));
    std::vector<int> a_idx(static_cast<std::size_t>(n_rows));
    std::vector<int> snext_idx(static_cast<std::size_t>(n_rows));
    for (int r = 0; r < n_rows; ++r) {
      const Transition& tr = mb.transitions[static_cast<std::size_t>(r)];
      s_idx[static_cast<std::size_t>(r)] = tr.s;
      a_idx[static_cast<std::size_t>(r)] = tr.a;
      snext_idx[static_cast<std::size_t>(r)] = tr.s_next;
    }

    const Array2 s_enc = detail::gather_enc(model.state_enc, s_idx);
    const Array2 snext_enc = detail::gather_enc(model.state_enc, snext_idx);
    const Array2 sint_enc = cfg.fb_integration == IntegrationMode::kRho
                                ? detail::gather_enc(model.state_enc,
                                                     mb.rho_states)
                                : snext_enc;

    Array2 z_all(n_rows, cfg.d, 0.0);
    Array2 z_resid_all(n_rows, cfg.d, 0.0);
    for (int r = 0; r < n_rows; ++r) {
      const TaskVector& z =
          z_cache[static_cast<std::size_t>(grouped ? r / cfg.batch_j : r)];
      const TaskVector zr = residual_ar_normalize(z);
      for (int c = 0; c < cfg.d; ++c) {
        z_all.at(r, c) = z.z[static_cast<std::size_t>(c)];
        z_resid_all.at(r, c) = zr.z[static_cast<std::size_t>(c)];
      }
    }

    // -- next actions from the online policy (value pass only) --
    const Array2 next_probs = model.pi.distribution(snext_enc, z_all);
    std::vector<int> anext_idx(static_cast<std::size_t>(n_rows));
    std::vector<double> prow(static_cast<std::size_t>(model.n_actions));
    for (int r = 0; r < n_rows; ++r) {
      for (int a = 0; a < model.n_actions; ++a) {
        prow[static_cast<std::size_t>(a)] = next_probs.at(r, a);
      }
      anext_idx[static_cast<std::size_t>(r)] = action_rng.categorical(prow);
    }

    // -- losses on one tape --
    Tape t;
    Var fb_quad_acc, fb_diag_acc, ortho_quad_acc, ortho_diag_acc;
    int fb_pairs_per_row = 0;
    int ortho_pairs_per_row = 0;

    for (int g = 0; g < n_groups; ++g) {
      const int r0 = g * group_rows;
      const int r1 = r0 + group_rows;
      const std::vector<int> a_g(a_idx.begin() + r0, a_idx.begin() + r1);
      const std::vector<int> an_g(anext_idx.begin() + r0,
                                  anext_idx.begin() + r1);
      Var s_g = t.constant(detail::slice_rows(s_enc, r0, r1));
      Var sn_g = t.constant(detail::slice_rows(snext_enc, r0, r1));
      Var a_oh = t.constant(one_hot_rows(a_g, model.n_actions));
      Var an_oh = t.constant(one_hot_rows(an_g, model.n_actions));
      Var z_g = t.constant(detail::slice_rows(z_all, r0, r1));
      Var zr_g = t.constant(detail::slice_rows(z_resid_all, r0, r1));

      std::vector<Var> f_online;
      f_online.reserve(model.f.members.size());
      for (ForwardNet& member : model.f.members) {
        f_online.push_back(member.forward(t, s_g, a_oh, z_g, true));
      }
      Var f_target_mean;
      bool first_target = true;
      for (ForwardNet& target : model.f.targets) {
        Var ft = target.forward(t, sn_g, an_oh, z_g, false);
        f_target_mean = first_target ? ft : t.add(f_target_mean, ft);
        first_target = false;
      }
      f_target_mean = t.scale(f_target_mean, inv_members);

      Var b_diag = model.b.forward(t, sn_g, zr_g, true);
      Var b_int = b_diag;
      Var b_int_target;
      if (cfg.fb_integration == IntegrationMode::kRho) {
        Var si_g = t.constant(detail::slice_rows(sint_enc, r0, r1));
        b_int = model.b.forward(t, si_g, zr_g, true);
        b_int_target = model.b_target.forward(t, si_g, zr_g, false);
      } else {
        b_int_target = model.b_target.forward(t, sn_g, zr_g, false);
      }

      FbKernelTerms fb = fb_pair_kernel(t, f_online, f_target_mean, b_int,
                                        b_int_target, b_diag, cfg.gamma,
                                        cfg.fb_pairs, cfg.fb_online_term);
      OrthoKernelTerms ortho = ortho_pair_kernel(t, b_diag, cfg.fb_pairs);
      fb_pairs_per_row = fb.pairs_per_row;
      ortho_pairs_per_row = ortho.pairs_per_row;
      if (g == 0) {
        fb_quad_acc = fb.quad;
        fb_diag_acc = fb.diag;
        ortho_quad_acc = ortho.quad;
        ortho_diag_acc = ortho.diag;
      } else {
        fb_quad_acc = t.add(fb_quad_acc, fb.quad);
        fb_diag_acc = t.add(fb_diag_acc, fb.diag);
        ortho_quad_acc = t.add(ortho_quad_acc, ortho.quad);
        ortho_diag_acc = t.add(ortho_diag_acc, ortho.diag);
      }
    }

    const double rows_total = static_cast<double>(n_groups) * group_rows;
    Var fb_offdiag = t.scale(
        fb_quad_acc, 1.0 / (2.0 * rows_total * fb_pairs_per_row));
    Var fb_diag = t.scale(fb_diag_acc, -1.0 / rows_total);
    Var fb_total = t.add(fb_offdiag, fb_diag);
    Var ortho_total = t.add(
        t.scale(ortho_quad_acc, 1.0 / (2.0 * rows_total * ortho_pairs_per_row)),
        t.scale(ortho_diag_acc, -1.0 / rows_total));

    // -- actor --
    Array2 z_actor = z_all;
    if (cfg.aw_fresh_z && cfg.variant != Variant::kVanilla) {
      for (int r = 0; r < n_rows; ++r) {
        const TaskVector z = model.draw_z(z_rng);
        for (int c = 0; c < cfg.d; ++c) {
          z_actor.at(r, c) = z.z[static_cast<std::size_t>(c)];
        }
      }
    }
    Var actor_loss;
    int clamped = 0;
    if (cfg.variant == Variant::kVanilla) {
      actor_loss = td3_actor_loss(t, model.f, model.pi, s_enc, z_actor);
    } else {
      const std::vector<double> adv = advantages(
          model.f, model.pi, s_enc, a_idx, z_actor, cfg.adv_literal_sum);
      const std::vector<double> weights =
          detail::actor_weights(adv, cfg.beta, cfg.aw_weighting);
      AwActorLoss aw =
          aw_actor_loss(t, model.pi, s_enc, a_idx, z_actor, weights);
      actor_loss = aw.loss;
      clamped = aw.clamped;
    }

    Var total = t.add(t.add(fb_total, t.scale(ortho_total, cfg.lambda_ortho)),
                      actor_loss);

    FbLossRow row;
    row.step = step;
    row.fb_offdiag = t.val(fb_offdiag).data[0];
    row.fb_diag = t.val(fb_diag).data[0];
    row.fb_loss = t.val(fb_total).data[0];
    row.ortho_loss = t.val(ortho_total).data[0];
    row.actor_loss = t.val(actor_loss).data[0];
    row.aw_clamped = clamped;

    if (!std::isfinite(row.fb_loss) || !std::isfinite(row.ortho_loss) ||
        !std::isfinite(row.actor_loss)) {
      throw NumericError("non-finite loss at step " + std::to_string(step));
    }
    if (std::fabs(row.fb_loss) > kDivergenceBound) {
      throw NumericError("measure loss diverged at step " +
                         std::to_string(step) + ": |" +
                         format_g17(row.fb_loss) + "| > " +
                         format_g17(kDivergenceBound));
    }

    // -- update --
    zero_grads(params);
    t.backward(total);
    adam_step(params, cfg.lr);
    for (std::size_t m = 0; m < model.f.members.size(); ++m) {
      polyak_update_net(model.f.targets[m], model.f.members[m],
                        cfg.polyak_zeta);
    }
    polyak_update_net(model.b_target, model.b, cfg.polyak_zeta);

    result.report.push_back(row);
    if (on_log && (step % cfg.log_interval == 0 || step + 1 == cfg.steps)) {
      on_log(model, row);
    }
  }
  return result;
}

}  // namespace fbrl

#endif  // FBRL_FB_CORE_HPP_
