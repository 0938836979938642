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
// Finite MDPs (gridworlds, random MDPs) and their exact tabular oracles:
// successor measures, Q-functions, value iteration, finite-horizon policy
// values. Everything here is deterministic given its inputs.
//
// Conventions used throughout the library:
//   * Rewards are collected on successor states: Q(s,a) = sum_{s'} M(s,a,s')
//     r(s') where the successor measure M counts visits from t >= 1 with
//     discount gamma^t. Row mass of M is gamma / (1 - gamma).
//   * Greedy argmax ties break toward the lowest action index.

#ifndef FBRL_MDP_HPP_
#define FBRL_MDP_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fbrl/array.hpp"
#include "fbrl/common.hpp"
#include "fbrl/linalg.hpp"
#include "fbrl/rng.hpp"

namespace fbrl {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// A reward function over states: one finite value per state.
struct RewardFn {
  std::vector<double> values;

  RewardFn() = default;
  explicit RewardFn(std::vector<double> v) : values(std::move(v)) {}

  void validate(int n_states) const {
    if (static_cast<int>(values.size()) != n_states) {
      throw ContractError("RewardFn: expected " + std::to_string(n_states) +
                          " values, got " + std::to_string(values.size()));
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw ContractError("RewardFn: non-finite value");
    }
  }
};

// A stochastic tabular policy: probs[s][a] = pi(a|s).
struct TabularPolicy {
  Array2 probs;  // n_states x n_actions

  void validate() const {
    for (int s = 0; s < probs.rows; ++s) {
      double total = 0.0;
      for (int a = 0; a < probs.cols; ++a) {
        double p = probs.at(s, a);
        if (!(p >= 0.0)) {
          throw ContractError("TabularPolicy: negative probability at state " +
                              std::to_string(s));
        }
        total += p;
      }
      if (std::fabs(total - 1.0) > 1e-12) {
        throw ContractError("TabularPolicy: row " + std::to_string(s) +
                            " sums to " + format_g17(total));
      }
    }
  }
};

// A finite MDP. The transition tensor P[s][a][s'] is stored as a
// (n_states*n_actions) x n_states matrix with row index s*n_actions + a,
// which is the layout every oracle below consumes directly.
struct FiniteMdp {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.95;
  Array2 transition;      // (n_states*n_actions) x n_states
  Array2 state_features;  // n_states x feature_dim, network input coordinates
  std::string id;         // stable identifier (hash of construction inputs)

  int sa_index(int s, int a) const { return s * n_actions + a; }

  double p(int s, int a, int s_next) const {
    return transition.at(sa_index(s, a), s_next);
  }

  void validate() const {
    if (n_states < 1 || n_actions < 1) {
      throw ContractError("FiniteMdp: need at least one state and action");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
      throw ContractError("FiniteMdp: gamma must lie in (0,1), got " +
                          format_g17(gamma));
    }
    if (transition.rows != n_states * n_actions ||
        transition.cols != n_states) {
      throw DimensionError("FiniteMdp: transition shape " +
                           transition.shape_str() + ", expected " +
                           std::to_string(n_states * n_actions) + "x" +
                           std::to_string(n_states));
    }
    if (state_features.rows != n_states) {
      throw DimensionError("FiniteMdp: state_features rows " +
                           std::to_string(state_features.rows));
    }
    for (int row = 0; row < transition.rows; ++row) {
      double total = 0.0;
      for (int c = 0; c < transition.cols; ++c) {
        double pr = transition.at(row, c);
        if (!(pr >= 0.0)) {
          throw ContractError("FiniteMdp: negative transition probability");
        }
        total += pr;
      }
      if (std::fabs(total - 1.0) > 1e-12) {
        throw ContractError("FiniteMdp: transition row " +
                            std::to_string(row) + " sums to " +
                            format_g17(total));
      }
    }
  }

  // Samples s' ~ P[s][a]. The final state absorbs any floating-point slack
  // so the draw always lands on a valid index.
  int sample_next(int s, int a, Rng& rng) const {
    const int row = sa_index(s, a);
    double u = rng.uniform();
    double acc = 0.0;
    for (int c = 0; c < n_states; ++c) {
      acc += transition.at(row, c);
      if (u < acc) return c;
    }
    return n_states - 1;
  }
};

// ---------------------------------------------------------------------------
// Gridworld construction
// ---------------------------------------------------------------------------

// Declarative description of a gridworld. Serializes to the versioned text
// format documented at to_text().
struct GridSpec {
  int width = 5;
  int height = 5;
  double slip_prob = 0.0;
  double gamma = 0.95;
  std::vector<std::pair<int, int>> walls;  // (x, y) cells removed from the grid

  // Canonical key-value text form:
  //
  //   fbrl-grid v1
  //   width 5
  //   height 5
  //   slip 0.1
  //   gamma 0.95
  //   walls 1
  //   wall 2 3
  //
  // Numbers are written with 17 significant digits so doubles round-trip.
  std::string to_text() const {
    std::ostringstream out;
    out << "fbrl-grid v1\n";
    out << "width " << width << "\n";
    out << "height " << height << "\n";
    out << "slip " << format_g17(slip_prob) << "\n";
    out << "gamma " << format_g17(gamma) << "\n";
    auto sorted = walls;
    std::sort(sorted.begin(), sorted.end());
    out << "walls " << sorted.size() << "\n";
    for (const auto& [x, y] : sorted) {
      out << "wall " << x << " " << y << "\n";
    }
    return out.str();
  }

  static GridSpec from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto next_line = [&](const char* what) {
      if (!std::getline(in, line)) {
        throw ContractError(std::string("grid spec: missing ") + what);
      }
      return line;
    };
    auto expect_key = [&](const std::string& ln, const std::string& key) {
      if (ln.rfind(key + " ", 0) != 0) {
        throw ContractError("grid spec: expected '" + key + " ...', got '" +
                            ln + "'");
      }
      return ln.substr(key.size() + 1);
    };
    if (next_line("header") != "fbrl-grid v1") {
      throw ContractError("grid spec: bad header '" + line + "'");
    }
    GridSpec spec;
    spec.width = static_cast<int>(
        parse_int(expect_key(next_line("width"), "width"), "grid width"));
    spec.height = static_cast<int>(
        parse_int(expect_key(next_line("height"), "height"), "grid height"));
    spec.slip_prob =
        parse_double(expect_key(next_line("slip"), "slip"), "grid slip");
    spec.gamma =
        parse_double(expect_key(next_line("gamma"), "gamma"), "grid gamma");
    const long long n_walls = parse_int(
        expect_key(next_line("walls"), "walls"), "grid wall count");
    for (long long i = 0; i < n_walls; ++i) {
      std::istringstream ws(next_line("wall entry"));
      std::string tag;
      int x = 0, y = 0;
      if (!(ws >> tag >> x >> y) || tag != "wall") {
        throw ContractError("grid spec: bad wall line '" + line + "'");
      }
      spec.walls.emplace_back(x, y);
    }
    return spec;
  }
};

// A gridworld: the FiniteMdp plus the cell <-> state index maps needed to
// phrase goals in grid coordinates. Wall cells are removed from the state
// space entirely, so a 5x5 grid with no walls has exactly 25 states.
struct GridWorld {
  FiniteMdp mdp;
  GridSpec spec;
  std::vector<int> cell_to_state;                // width*height, -1 for walls
  std::vector<std::pair<int, int>> state_to_cell;

  int state_at(int x, int y) const {
    if (x < 0 || x >= spec.width || y < 0 || y >= spec.height) {
      throw ContractError("gridworld: cell (" + std::to_string(x) + "," +
                          std::to_string(y) + ") out of range");
    }
    int s = cell_to_state[static_cast<std::size_t>(y) * spec.width + x];
    if (s < 0) {
      throw ContractError("gridworld: cell (" + std::to_string(x) + "," +
                          std::to_string(y) + ") is a wall");
    }
    return s;
  }

  // Indicator reward: 1 on the goal cell, 0 elsewhere.
  RewardFn goal_reward(int x, int y) const {
    RewardFn r(std::vector<double>(mdp.n_states, 0.0));
    r.values[static_cast<std::size_t>(state_at(x, y))] = 1.0;
    return r;
  }
};

// Builds a gridworld MDP. Four actions (0=up/+y, 1=down/-y, 2=left/-x,
// 3=right/+x). The intended move happens with probability 1 - slip_prob;
// with probability slip_prob one of the other three moves is chosen
// uniformly. Moves into walls or off the border leave the state unchanged.
// State features are the normalized cell coordinates (x/(w-1), y/(h-1)).
inline GridWorld build_gridworld(const GridSpec& spec) {
  if (spec.width < 2 || spec.height < 2) {
    throw ContractError("build_gridworld: width and height must be >= 2");
  }
  if (!(spec.slip_prob >= 0.0 && spec.slip_prob < 1.0)) {
    throw ContractError("build_gridworld: slip_prob must lie in [0,1)");
  }
  if (!(spec.gamma > 0.0 && spec.gamma < 1.0)) {
    throw ContractError("build_gridworld: gamma must lie in (0,1)");
  }

  GridWorld gw;
  gw.spec = spec;
  gw.cell_to_state.assign(
      static_cast<std::size_t>(spec.width) * spec.height, -1);
  for (const auto& [x, y] : spec.walls) {
    if (x < 0 || x >= spec.width || y < 0 || y >= spec.height) {
      throw ContractError("build_gridworld: wall (" + std::to_string(x) + "," +
                          std::to_string(y) + ") out of range");
    }
    gw.cell_to_state[static_cast<std::size_t>(y) * spec.width + x] = -2;
  }
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      std::size_t cell = static_cast<std::size_t>(y) * spec.width + x;
      if (gw.cell_to_state[cell] == -2) {
        gw.cell_to_state[cell] = -1;  // wall
        continue;
      }
      gw.cell_to_state[cell] = static_cast<int>(gw.state_to_cell.size());
      gw.state_to_cell.emplace_back(x, y);
    }
  }
  const int n = static_cast<int>(gw.state_to_cell.size());
  if (n == 0) {
    throw ContractError("build_gridworld: every cell is a wall");
  }

  constexpr int kActions = 4;
  constexpr int dx[kActions] = {0, 0, -1, 1};
  constexpr int dy[kActions] = {1, -1, 0, 0};

  FiniteMdp mdp;
  mdp.n_states = n;
  mdp.n_actions = kActions;
  mdp.gamma = spec.gamma;
  mdp.transition = Array2(n * kActions, n, 0.0);
  mdp.state_features = Array2(n, 2);
  for (int s = 0; s < n; ++s) {
    const auto [x, y] = gw.state_to_cell[static_cast<std::size_t>(s)];
    mdp.state_features.at(s, 0) = static_cast<double>(x) / (spec.width - 1);
    mdp.state_features.at(s, 1) = static_cast<double>(y) / (spec.height - 1);
    // Where each of the four moves lands (staying put when blocked).
    int dest[kActions];
    for (int m = 0; m < kActions; ++m) {
      const int nx = x + dx[m];
      const int ny = y + dy[m];
      dest[m] = s;
      if (nx >= 0 && nx < spec.width && ny >= 0 && ny < spec.height) {
        int t = gw.cell_to_state[static_cast<std::size_t>(ny) * spec.width + nx];
        if (t >= 0) dest[m] = t;
      }
    }
    for (int a = 0; a < kActions; ++a) {
      const int row = mdp.sa_index(s, a);
      mdp.transition.at(row, dest[a]) += 1.0 - spec.slip_prob;
      for (int m = 0; m < kActions; ++m) {
        if (m == a) continue;
        mdp.transition.at(row, dest[m]) += spec.slip_prob / (kActions - 1);
      }
    }
  }
  mdp.id = "grid-" + std::to_string(fnv1a64(spec.to_text()));
  mdp.validate();
  gw.mdp = std::move(mdp);
  return gw;
}

// ---------------------------------------------------------------------------
// Random MDP construction
// ---------------------------------------------------------------------------

// Builds a dense random MDP: each transition row is an independent draw from
// the flat Dirichlet (via normalized exponentials). State features are the
// normalized state index, a single coordinate.
inline FiniteMdp build_random_mdp(int n_states, int n_actions, double gamma,
                                  std::uint64_t seed) {
  if (n_states < 2 || n_actions < 2) {
    throw ContractError("build_random_mdp: need >= 2 states and actions");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ContractError("build_random_mdp: gamma must lie in (0,1)");
  }
  Rng rng(seed);
  FiniteMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.transition = Array2(n_states * n_actions, n_states);
  for (int row = 0; row < mdp.transition.rows; ++row) {
    double total = 0.0;
    for (int c = 0; c < n_states; ++c) {
      const double e = -std::log(1.0 - rng.uniform());  // Exp(1)
      mdp.transition.at(row, c) = e;
      total += e;
    }
    for (int c = 0; c < n_states; ++c) mdp.transition.at(row, c) /= total;
  }
  mdp.state_features = Array2(n_states, 1);
  for (int s = 0; s < n_states; ++s) {
    mdp.state_features.at(s, 0) = static_cast<double>(s) / (n_states - 1);
  }
  mdp.id = "random-" + std::to_string(n_states) + "s" +
           std::to_string(n_actions) + "a-seed" + std::to_string(seed);
  mdp.validate();
  return mdp;
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

inline TabularPolicy uniform_policy(const FiniteMdp& mdp) {
  TabularPolicy pi;
  pi.probs = Array2(mdp.n_states, mdp.n_actions,
                    1.0 / static_cast<double>(mdp.n_actions));
  return pi;
}

// Deterministic greedy policy from a Q table; ties break toward the lowest
// action index (strict > comparison scanning left to right).
inline TabularPolicy greedy_policy(const Array2& q) {
  TabularPolicy pi;
  pi.probs = Array2(q.rows, q.cols, 0.0);
  for (int s = 0; s < q.rows; ++s) {
    int best = 0;
    for (int a = 1; a < q.cols; ++a) {
      if (q.at(s, a) > q.at(s, best)) best = a;
    }
    pi.probs.at(s, best) = 1.0;
  }
  return pi;
}

inline void validate_policy(const FiniteMdp& mdp, const TabularPolicy& pi) {
  if (pi.probs.rows != mdp.n_states || pi.probs.cols != mdp.n_actions) {
    throw DimensionError("policy shape " + pi.probs.shape_str() +
                         " does not match MDP (" +
                         std::to_string(mdp.n_states) + " states, " +
                         std::to_string(mdp.n_actions) + " actions)");
  }
  pi.validate();
}

// State-to-state transition matrix under a policy:
// P_pi[s][s'] = sum_a pi(a|s) P[s][a][s'].
inline Array2 policy_transition(const FiniteMdp& mdp,
                                const TabularPolicy& pi) {
  validate_policy(mdp, pi);
  Array2 p_pi(mdp.n_states, mdp.n_states, 0.0);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double w = pi.probs.at(s, a);
      if (w == 0.0) continue;
      const int row = mdp.sa_index(s, a);
      for (int t = 0; t < mdp.n_states; ++t) {
        p_pi.at(s, t) += w * mdp.transition.at(row, t);
      }
    }
  }
  return p_pi;
}

// ---------------------------------------------------------------------------
// Exact oracles
// ---------------------------------------------------------------------------

// Discounted successor measure, counting visits from t >= 1:
// M[s0,a0,s'] = sum_{t>=1} gamma^t Pr(s_t = s' | s0, a0, pi). Each row sums
// to gamma / (1 - gamma).
struct SuccessorMeasureExact {
  Array2 m;  // (n_states*n_actions) x n_states

  void validate(double gamma) const {
    const double mass = gamma / (1.0 - gamma);
    for (int row = 0; row < m.rows; ++row) {
      double total = 0.0;
      for (int c = 0; c < m.cols; ++c) {
        if (!(m.at(row, c) >= 0.0)) {
          throw NumericError("successor measure: negative entry");
        }
        total += m.at(row, c);
      }
      if (std::fabs(total - mass) > 1e-9) {
        throw NumericError("successor measure: row " + std::to_string(row) +
                           " mass " + format_g17(total) + ", expected " +
                           format_g17(mass));
      }
    }
  }
};

// M = gamma * P * (I - gamma * P_pi)^{-1}, computed by direct linear solve.
inline SuccessorMeasureExact successor_measure_exact(const FiniteMdp& mdp,
                                                     const TabularPolicy& pi) {
  const Array2 p_pi = policy_transition(mdp, pi);
  // N = (I - gamma P_pi)^{-1}.
  Array2 system = Array2::identity(mdp.n_states);
  for (std::size_t i = 0; i < system.size(); ++i) {
    system.data[i] -= mdp.gamma * p_pi.data[i];
  }
  const Array2 occupancy = solve(system, Array2::identity(mdp.n_states));
  SuccessorMeasureExact result;
  result.m = matmul_value(mdp.transition, occupancy);
  for (double& v : result.m.data) {
    v *= mdp.gamma;
    if (v < 0.0 && v > -1e-12) v = 0.0;  // clip solver round-off
  }
  return result;
}

// Q[s][a] = sum_{s'} M[s][a][s'] r(s') (reward on successor states).
inline Array2 q_function_exact(const FiniteMdp& mdp, const TabularPolicy& pi,
                               const RewardFn& r) {
  r.validate(mdp.n_states);
  const SuccessorMeasureExact sm = successor_measure_exact(mdp, pi);
  Array2 q(mdp.n_states, mdp.n_actions, 0.0);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int row = mdp.sa_index(s, a);
      double acc = 0.0;
      for (int t = 0; t < mdp.n_states; ++t) {
        acc += sm.m.at(row, t) * r.values[static_cast<std::size_t>(t)];
      }
      q.at(s, a) = acc;
    }
  }
  return q;
}

struct ValueIterationResult {
  Array2 q;          // n_states x n_actions
  TabularPolicy pi;  // greedy, deterministic
  int iterations = 0;
};

// Optimal-control oracle under the successor-state reward convention:
// Q*[s][a] = gamma * sum_{s'} P[s][a][s'] (r(s') + max_a' Q*[s'][a'])
// iterated from zero until the sup-norm update falls below tol. This is the
// fixed point consistent with Q = M r (expand the geometric series of M to
// see the matching powers of gamma), so value_iteration output is directly
// comparable to q_function_exact.
inline ValueIterationResult value_iteration(const FiniteMdp& mdp,
                                            const RewardFn& r, double tol,
                                            int max_iter = 1000000) {
  if (!(tol > 0.0)) throw ContractError("value_iteration: tol must be > 0");
  r.validate(mdp.n_states);
  ValueIterationResult out;
  out.q = Array2(mdp.n_states, mdp.n_actions, 0.0);
  std::vector<double> vmax(static_cast<std::size_t>(mdp.n_states), 0.0);
  for (int it = 0; it < max_iter; ++it) {
    double delta = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      for (int a = 0; a < mdp.n_actions; ++a) {
        const int row = mdp.sa_index(s, a);
        double acc = 0.0;
        for (int t = 0; t < mdp.n_states; ++t) {
          const double pr = mdp.transition.at(row, t);
          if (pr == 0.0) continue;
          acc += pr * (r.values[static_cast<std::size_t>(t)] +
                       vmax[static_cast<std::size_t>(t)]);
        }
        acc *= mdp.gamma;
        delta = std::max(delta, std::fabs(acc - out.q.at(s, a)));
        out.q.at(s, a) = acc;
      }
    }
    for (int s = 0; s < mdp.n_states; ++s) {
      double best = out.q.at(s, 0);
      for (int a = 1; a < mdp.n_actions; ++a) {
        best = std::max(best, out.q.at(s, a));
      }
      vmax[static_cast<std::size_t>(s)] = best;
    }
    out.iterations = it + 1;
    if (delta < tol) break;
  }
  out.pi = greedy_policy(out.q);
  return out;
}

// Exact finite-horizon value of a policy:
// V_H[s] = E[ sum_{t=1..H} gamma^t r(s_t) | s_0 = s, pi ],
// the quantity Monte-Carlo episode returns estimate.
inline std::vector<double> policy_value_finite_horizon(
    const FiniteMdp& mdp, const TabularPolicy& pi, const RewardFn& r,
    int horizon) {
  if (horizon < 0) throw ContractError("policy_value_finite_horizon: horizon < 0");
  r.validate(mdp.n_states);
  const Array2 p_pi = policy_transition(mdp, pi);
  std::vector<double> value(static_cast<std::size_t>(mdp.n_states), 0.0);
  std::vector<double> next(value.size(), 0.0);
  for (int h = 0; h < horizon; ++h) {
    // value := gamma * P_pi (r + value)
    for (int s = 0; s < mdp.n_states; ++s) {
      double acc = 0.0;
      for (int t = 0; t < mdp.n_states; ++t) {
        const double pr = p_pi.at(s, t);
        if (pr == 0.0) continue;
        acc += pr * (r.values[static_cast<std::size_t>(t)] +
                     value[static_cast<std::size_t>(t)]);
      }
      next[static_cast<std::size_t>(s)] = mdp.gamma * acc;
    }
    std::swap(value, next);
  }
  return value;
}

}  // namespace fbrl

#endif  // FBRL_MDP_HPP_
