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
// Offline transition datasets: uniform-exploration collection, mixtures of
// task-directed behavior pooled from single-task Q-learners, minibatch
// sampling, and a versioned plain-text persistence format.

#ifndef FBRL_DATASET_HPP_
#define FBRL_DATASET_HPP_

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fbrl/common.hpp"
#include "fbrl/mdp.hpp"
#include "fbrl/rng.hpp"

namespace fbrl {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

// One reward-free observed transition (s, a, s').
struct Transition {
  int s = 0;
  int a = 0;
  int s_next = 0;

  bool operator==(const Transition& o) const {
    return s == o.s && a == o.a && s_next == o.s_next;
  }
};

// An offline dataset plus its empirical next-state distribution rho. rho is
// the distribution the learned features integrate against, so it is always
// recomputed from the stored transitions, never persisted separately.
struct OfflineDataset {
  std::vector<Transition> transitions;
  std::vector<double> rho;  // size n_states; empirical frequency of s_next
  int n_states = 0;
  int n_actions = 0;
  std::string source_mdp_id;
  std::uint64_t seed = 0;

  void recompute_rho() {
    rho.assign(static_cast<std::size_t>(n_states), 0.0);
    if (transitions.empty()) return;
    for (const Transition& t : transitions) {
      rho[static_cast<std::size_t>(t.s_next)] += 1.0;
    }
    for (double& v : rho) v /= static_cast<double>(transitions.size());
  }

  void validate() const {
    if (n_states < 1 || n_actions < 1) {
      throw ContractError("dataset: n_states and n_actions must be >= 1");
    }
    for (const Transition& t : transitions) {
      if (t.s < 0 || t.s >= n_states || t.s_next < 0 || t.s_next >= n_states ||
          t.a < 0 || t.a >= n_actions) {
        throw ContractError("dataset: transition index out of bounds");
      }
    }
    if (static_cast<int>(rho.size()) != n_states) {
      throw ContractError("dataset: rho size mismatch");
    }
    double total = 0.0;
    for (double v : rho) total += v;
    if (!transitions.empty() && std::fabs(total - 1.0) > 1e-12) {
      throw ContractError("dataset: rho sums to " + format_g17(total));
    }
  }

  // Versioned plain-text container:
  //
  //   fbrl-dataset v1
  //   mdp <id>
  //   seed <integer>
  //   states <n_states>
  //   actions <n_actions>
  //   count <n>
  //   <s> <a> <s_next>     (count lines)
  std::string to_text() const {
    std::ostringstream out;
    out << "fbrl-dataset v1\n";
    out << "mdp " << source_mdp_id << "\n";
    out << "seed " << seed << "\n";
    out << "states " << n_states << "\n";
    out << "actions " << n_actions << "\n";
    out << "count " << transitions.size() << "\n";
    for (const Transition& t : transitions) {
      out << t.s << " " << t.a << " " << t.s_next << "\n";
    }
    return out.str();
  }

  static OfflineDataset from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto next_line = [&](const char* what) {
      if (!std::getline(in, line)) {
        throw ContractError(std::string("dataset: missing ") + what);
      }
      return line;
    };
    auto expect_key = [&](const std::string& ln, const std::string& key) {
      if (ln.rfind(key + " ", 0) != 0) {
        throw ContractError("dataset: expected '" + key + " ...', got '" + ln +
                            "'");
      }
      return ln.substr(key.size() + 1);
    };
    if (next_line("header") != "fbrl-dataset v1") {
      throw ContractError("dataset: bad header '" + line + "'");
    }
    OfflineDataset ds;
    ds.source_mdp_id = expect_key(next_line("mdp"), "mdp");
    ds.seed = static_cast<std::uint64_t>(
        parse_int(expect_key(next_line("seed"), "seed"), "dataset seed"));
    ds.n_states = static_cast<int>(
        parse_int(expect_key(next_line("states"), "states"), "dataset states"));
    ds.n_actions = static_cast<int>(parse_int(
        expect_key(next_line("actions"), "actions"), "dataset actions"));
    const long long count = parse_int(
        expect_key(next_line("count"), "count"), "dataset count");
    ds.transitions.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
      std::istringstream ts(next_line("transition"));
      Transition t;
      if (!(ts >> t.s >> t.a >> t.s_next)) {
        throw ContractError("dataset: bad transition line '" + line + "'");
      }
      std::string extra;
      if (ts >> extra) {
        throw ContractError("dataset: trailing tokens on '" + line + "'");
      }
      ds.transitions.push_back(t);
    }
    ds.recompute_rho();
    ds.validate();
    return ds;
  }
};

inline void save_dataset(const std::string& path, const OfflineDataset& ds) {
  write_text_file(path, ds.to_text());
}

inline OfflineDataset load_dataset(const std::string& path) {
  return OfflineDataset::from_text(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Collection
// ---------------------------------------------------------------------------

// Uniform exploration: n transitions from uniformly random (s, a) pairs with
// s' ~ P. The desk-scale stand-in for a dedicated exploration algorithm.
inline OfflineDataset collect_uniform(const FiniteMdp& mdp, int n,
                                      std::uint64_t seed) {
  if (n < 1) throw ContractError("collect_uniform: n must be >= 1");
  mdp.validate();
  Rng rng(seed);
  OfflineDataset ds;
  ds.n_states = mdp.n_states;
  ds.n_actions = mdp.n_actions;
  ds.source_mdp_id = mdp.id;
  ds.seed = seed;
  ds.transitions.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Transition t;
    t.s = rng.uniform_int(mdp.n_states);
    t.a = rng.uniform_int(mdp.n_actions);
    t.s_next = mdp.sample_next(t.s, t.a, rng);
    ds.transitions.push_back(t);
  }
  ds.recompute_rho();
  ds.validate();
  return ds;
}

// Length of a behavior-collection episode before teleporting to a fresh
// uniform start state. Keeps single-task learners from stagnating in
// absorbing regions while they are still exploring.
inline constexpr int kMoodEpisodeLength = 100;

// Q-learning step size for the single-task collectors.
inline constexpr double kMoodLearningRate = 0.1;

// Mixture-of-behaviors dataset: for each training reward, run a tabular
// Q-learning agent with epsilon-greedy exploration annealed linearly from
// epsilon_schedule.first to epsilon_schedule.second over steps_per_task
// steps, recording every transition along the way, then pool the streams.
// The result contains near-optimal behavior for the training tasks only --
// the hard setting for zero-shot generalization to held-out tasks.
inline OfflineDataset collect_mood(const FiniteMdp& mdp,
                                   const std::vector<RewardFn>& training_rewards,
                                   int steps_per_task,
                                   std::pair<double, double> epsilon_schedule,
                                   std::uint64_t seed) {
  if (training_rewards.empty()) {
    throw ContractError("collect_mood: need at least one training reward");
  }
  if (steps_per_task < 1) {
    throw ContractError("collect_mood: steps_per_task must be >= 1");
  }
  const auto [eps_start, eps_end] = epsilon_schedule;
  if (!(eps_start >= 0.0 && eps_start <= 1.0 && eps_end >= 0.0 &&
        eps_end <= 1.0)) {
    throw ContractError("collect_mood: epsilon bounds must lie in [0,1]");
  }
  mdp.validate();

  OfflineDataset ds;
  ds.n_states = mdp.n_states;
  ds.n_actions = mdp.n_actions;
  ds.source_mdp_id = mdp.id;
  ds.seed = seed;
  ds.transitions.reserve(static_cast<std::size_t>(steps_per_task) *
                         training_rewards.size());

  Rng root(seed);
  for (std::size_t task = 0; task < training_rewards.size(); ++task) {
    const RewardFn& r = training_rewards[task];
    r.validate(mdp.n_states);
    Rng rng = root.split(task);
    Array2 q(mdp.n_states, mdp.n_actions, 0.0);
    int s = rng.uniform_int(mdp.n_states);
    for (int step = 0; step < steps_per_task; ++step) {
      const double frac =
          steps_per_task == 1
              ? 1.0
              : static_cast<double>(step) / (steps_per_task - 1);
      const double eps = eps_start + (eps_end - eps_start) * frac;

      int a = 0;
      if (rng.uniform() < eps) {
        a = rng.uniform_int(mdp.n_actions);
      } else {
        for (int cand = 1; cand < mdp.n_actions; ++cand) {
          if (q.at(s, cand) > q.at(s, a)) a = cand;
        }
      }
      const int s_next = mdp.sample_next(s, a, rng);
      ds.transitions.push_back(Transition{s, a, s_next});

      // Successor-state reward convention, matching the exact oracles:
      // target = gamma * (r(s') + max_a' Q(s', a')).
      double vmax = q.at(s_next, 0);
      for (int cand = 1; cand < mdp.n_actions; ++cand) {
        vmax = std::max(vmax, q.at(s_next, cand));
      }
      const double target =
          mdp.gamma * (r.values[static_cast<std::size_t>(s_next)] + vmax);
      q.at(s, a) += kMoodLearningRate * (target - q.at(s, a));

      s = s_next;
      if ((step + 1) % kMoodEpisodeLength == 0) {
        s = rng.uniform_int(mdp.n_states);
      }
    }
  }
  ds.recompute_rho();
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Minibatch sampling
// ---------------------------------------------------------------------------

// A sampled minibatch of i*j transitions plus i*j independent states drawn
// from rho (the integration samples for the feature-matching loss). Sampling
// is with replacement; drawing a uniform transition and keeping its s_next
// reproduces rho exactly by construction.
struct Minibatch {
  int i = 0;
  int j = 0;
  std::vector<Transition> transitions;  // i*j, row-major in (i, j)
  std::vector<int> rho_states;          // i*j
};

inline Minibatch sample_minibatch(const OfflineDataset& ds, int i, int j,
                                  Rng& rng) {
  if (ds.transitions.empty()) {
    throw ContractError("sample_minibatch: empty dataset");
  }
  if (i < 1 || j < 1) {
    throw ContractError("sample_minibatch: i and j must be >= 1");
  }
  const int n = static_cast<int>(ds.transitions.size());
  Minibatch mb;
  mb.i = i;
  mb.j = j;
  mb.transitions.reserve(static_cast<std::size_t>(i) * j);
  mb.rho_states.reserve(static_cast<std::size_t>(i) * j);
  for (int k = 0; k < i * j; ++k) {
    mb.transitions.push_back(
        ds.transitions[static_cast<std::size_t>(rng.uniform_int(n))]);
  }
  for (int k = 0; k < i * j; ++k) {
    mb.rho_states.push_back(
        ds.transitions[static_cast<std::size_t>(rng.uniform_int(n))].s_next);
  }
  return mb;
}

}  // namespace fbrl

#endif  // FBRL_DATASET_HPP_
