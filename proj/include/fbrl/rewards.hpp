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
// Ways to specify a reward function at prompt time:
//
//   - a state-indexed value table (versioned text file),
//   - a goal cell on a gridworld (indicator reward),
//   - an arithmetic expression over the state features, e.g.
//       exp(-((x - 0.8)^2 + (y - 0.8)^2) / 0.02)
//     with operators + - * / ^, comparison indicators (< <= > >= == !=),
//     unary minus, exp(), and variables x, y (features 0 and 1) or f0, f1, ...
//
// Plus the goal suites evaluation runs over: the four corners and a seeded
// draw of additional distinct goal cells.

#ifndef FBRL_REWARDS_HPP_
#define FBRL_REWARDS_HPP_

#include <cctype>
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
// Expression parser
// ---------------------------------------------------------------------------

// One node of a parsed reward expression. Children are stored by value; the
// whole tree copies and moves like any other value.
struct RewardExpr {
  enum class Kind {
    kNumber,   // value
    kVar,      // var_index into the feature vector
    kNeg,      // -child[0]
    kAdd, kSub, kMul, kDiv, kPow,   // child[0] op child[1]
    kLt, kLe, kGt, kGe, kEq, kNe,   // indicator: 1.0 if true else 0.0
    kExp,      // exp(child[0])
  };

  Kind kind = Kind::kNumber;
  double value = 0.0;
  int var_index = 0;
  std::vector<RewardExpr> children;
};

namespace detail {

struct ExprParser {
  const std::string& src;
  std::size_t pos = 0;

  explicit ExprParser(const std::string& s) : src(s) {}

  void skip_spaces() {
    while (pos < src.size() &&
           std::isspace(static_cast<unsigned char>(src[pos]))) {
      ++pos;
    }
  }

  bool eat(const char* token) {
    skip_spaces();
    const std::size_t len = std::char_traits<char>::length(token);
    if (src.compare(pos, len, token) == 0) {
      // Never split "<=" into "<" "=": a one-char comparison must not be
      // followed by '='.
      if (len == 1 && (token[0] == '<' || token[0] == '>') &&
          pos + 1 < src.size() && src[pos + 1] == '=') {
        return false;
      }
      pos += len;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) {
    throw ContractError("reward expression: " + what + " at position " +
                        std::to_string(pos) + " in '" + src + "'");
  }

  RewardExpr parse_comparison() {
    RewardExpr left = parse_additive();
    for (;;) {
      RewardExpr::Kind kind;
      if (eat("<=")) kind = RewardExpr::Kind::kLe;
      else if (eat(">=")) kind = RewardExpr::Kind::kGe;
      else if (eat("==")) kind = RewardExpr::Kind::kEq;
      else if (eat("!=")) kind = RewardExpr::Kind::kNe;
      else if (eat("<")) kind = RewardExpr::Kind::kLt;
      else if (eat(">")) kind = RewardExpr::Kind::kGt;
      else break;
      RewardExpr node;
      node.kind = kind;
      node.children.push_back(std::move(left));
      node.children.push_back(parse_additive());
      left = std::move(node);
    }
    return left;
  }

  RewardExpr parse_additive() {
    RewardExpr left = parse_term();
    for (;;) {
      RewardExpr::Kind kind;
      if (eat("+")) kind = RewardExpr::Kind::kAdd;
      else if (eat("-")) kind = RewardExpr::Kind::kSub;
      else break;
      RewardExpr node;
      node.kind = kind;
      node.children.push_back(std::move(left));
      node.children.push_back(parse_term());
      left = std::move(node);
    }
    return left;
  }

  RewardExpr parse_term() {
    RewardExpr left = parse_unary();
    for (;;) {
      RewardExpr::Kind kind;
      if (eat("*")) kind = RewardExpr::Kind::kMul;
      else if (eat("/")) kind = RewardExpr::Kind::kDiv;
      else break;
      RewardExpr node;
      node.kind = kind;
      node.children.push_back(std::move(left));
      node.children.push_back(parse_unary());
      left = std::move(node);
    }
    return left;
  }

  RewardExpr parse_unary() {
    if (eat("-")) {
      RewardExpr node;
      node.kind = RewardExpr::Kind::kNeg;
      node.children.push_back(parse_unary());
      return node;
    }
    return parse_power();
  }

  RewardExpr parse_power() {
    RewardExpr base = parse_primary();
    if (eat("^")) {
      RewardExpr node;
      node.kind = RewardExpr::Kind::kPow;
      node.children.push_back(std::move(base));
      node.children.push_back(parse_unary());  // right-associative
      return node;
    }
    return base;
  }

  RewardExpr parse_primary() {
    skip_spaces();
    if (pos >= src.size()) fail("unexpected end of input");

    if (eat("(")) {
      RewardExpr inner = parse_comparison();
      if (!eat(")")) fail("expected ')'");
      return inner;
    }

    const char c = src[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return parse_number();
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      return parse_identifier();
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  RewardExpr parse_number() {
    const std::size_t start = pos;
    while (pos < src.size() &&
           (std::isdigit(static_cast<unsigned char>(src[pos])) ||
            src[pos] == '.')) {
      ++pos;
    }
    if (pos < src.size() && (src[pos] == 'e' || src[pos] == 'E')) {
      std::size_t exp_pos = pos + 1;
      if (exp_pos < src.size() && (src[exp_pos] == '+' || src[exp_pos] == '-')) {
        ++exp_pos;
      }
      if (exp_pos < src.size() &&
          std::isdigit(static_cast<unsigned char>(src[exp_pos]))) {
        pos = exp_pos;
        while (pos < src.size() &&
               std::isdigit(static_cast<unsigned char>(src[pos]))) {
          ++pos;
        }
      }
    }
    RewardExpr node;
    node.kind = RewardExpr::Kind::kNumber;
    node.value = parse_double(src.substr(start, pos - start),
                              "reward expression number");
    return node;
  }

  RewardExpr parse_identifier() {
    const std::size_t start = pos;
    while (pos < src.size() &&
           (std::isalnum(static_cast<unsigned char>(src[pos])) ||
            src[pos] == '_')) {
      ++pos;
    }
    const std::string name = src.substr(start, pos - start);

    if (eat("(")) {
      if (name != "exp") fail("unknown function '" + name + "'");
      RewardExpr node;
      node.kind = RewardExpr::Kind::kExp;
      node.children.push_back(parse_comparison());
      if (!eat(")")) fail("expected ')' after exp argument");
      return node;
    }

    RewardExpr node;
    node.kind = RewardExpr::Kind::kVar;
    if (name == "x") {
      node.var_index = 0;
    } else if (name == "y") {
      node.var_index = 1;
    } else if (name.size() >= 2 && name[0] == 'f') {
      const std::string digits = name.substr(1);
      for (char d : digits) {
        if (!std::isdigit(static_cast<unsigned char>(d))) {
          fail("unknown variable '" + name + "'");
        }
      }
      node.var_index =
          static_cast<int>(parse_int(digits, "feature variable index"));
    } else {
      fail("unknown variable '" + name + "'");
    }
    return node;
  }
};

}  // namespace detail

inline RewardExpr parse_reward_expr(const std::string& src) {
  detail::ExprParser parser(src);
  RewardExpr root = parser.parse_comparison();
  parser.skip_spaces();
  if (parser.pos != src.size()) {
    parser.fail("trailing input");
  }
  return root;
}

// Evaluates an expression on one state's feature vector. Arithmetic follows
// IEEE semantics; the per-state finiteness check happens at table build time.
inline double eval_reward_expr(const RewardExpr& e,
                               const std::vector<double>& features) {
  using K = RewardExpr::Kind;
  auto child = [&](std::size_t i) {
    return eval_reward_expr(e.children[i], features);
  };
  switch (e.kind) {
    case K::kNumber: return e.value;
    case K::kVar:
      if (e.var_index < 0 ||
          e.var_index >= static_cast<int>(features.size())) {
        throw ContractError("reward expression: feature f" +
                            std::to_string(e.var_index) +
                            " out of range (state has " +
                            std::to_string(features.size()) + " features)");
      }
      return features[static_cast<std::size_t>(e.var_index)];
    case K::kNeg: return -child(0);
    case K::kAdd: return child(0) + child(1);
    case K::kSub: return child(0) - child(1);
    case K::kMul: return child(0) * child(1);
    case K::kDiv: return child(0) / child(1);
    case K::kPow: return std::pow(child(0), child(1));
    case K::kLt: return child(0) < child(1) ? 1.0 : 0.0;
    case K::kLe: return child(0) <= child(1) ? 1.0 : 0.0;
    case K::kGt: return child(0) > child(1) ? 1.0 : 0.0;
    case K::kGe: return child(0) >= child(1) ? 1.0 : 0.0;
    case K::kEq: return child(0) == child(1) ? 1.0 : 0.0;
    case K::kNe: return child(0) != child(1) ? 1.0 : 0.0;
    case K::kExp: return std::exp(child(0));
  }
  throw ContractError("unreachable");
}

// Evaluates an expression on every state's features to a reward table.
inline RewardFn reward_from_expr(const FiniteMdp& mdp,
                                 const std::string& src) {
  const RewardExpr expr = parse_reward_expr(src);
  RewardFn r(std::vector<double>(static_cast<std::size_t>(mdp.n_states), 0.0));
  for (int s = 0; s < mdp.n_states; ++s) {
    std::vector<double> features(
        static_cast<std::size_t>(mdp.state_features.cols), 0.0);
    for (int c = 0; c < mdp.state_features.cols; ++c) {
      features[static_cast<std::size_t>(c)] = mdp.state_features.at(s, c);
    }
    const double v = eval_reward_expr(expr, features);
    if (!std::isfinite(v)) {
      throw ContractError("reward expression '" + src +
                          "' evaluates to a non-finite value at state " +
                          std::to_string(s));
    }
    r.values[static_cast<std::size_t>(s)] = v;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Reward table files
// ---------------------------------------------------------------------------

// Versioned plain-text value table:
//
//   fbrl-reward v1
//   states <n>
//   <value>            (n lines, 17 significant digits)
inline std::string reward_table_to_text(const RewardFn& r) {
  std::ostringstream out;
  out << "fbrl-reward v1\n";
  out << "states " << r.values.size() << "\n";
  for (double v : r.values) out << format_g17(v) << "\n";
  return out.str();
}

inline RewardFn reward_table_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "fbrl-reward v1") {
    throw ContractError("reward table: bad header '" + line + "'");
  }
  if (!std::getline(in, line) || line.rfind("states ", 0) != 0) {
    throw ContractError("reward table: expected 'states <n>'");
  }
  const long long n = parse_int(line.substr(7), "reward table state count");
  if (n < 1) throw ContractError("reward table: state count must be >= 1");
  RewardFn r;
  r.values.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    if (!std::getline(in, line)) {
      throw ContractError("reward table: expected " + std::to_string(n) +
                          " values, got " + std::to_string(i));
    }
    r.values.push_back(parse_double(line, "reward table value"));
  }
  return r;
}

inline void save_reward_table(const std::string& path, const RewardFn& r) {
  write_text_file(path, reward_table_to_text(r));
}

inline RewardFn load_reward_table(const std::string& path) {
  return reward_table_from_text(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Goal suites
// ---------------------------------------------------------------------------

// A named reward: one row of an evaluation suite.
struct NamedReward {
  std::string name;
  RewardFn reward;
};

// The four corner cells of a grid, skipping any that are walls.
inline std::vector<std::pair<int, int>> corner_cells(const GridWorld& gw) {
  const int w = gw.spec.width;
  const int h = gw.spec.height;
  std::vector<std::pair<int, int>> corners = {
      {0, 0}, {w - 1, 0}, {0, h - 1}, {w - 1, h - 1}};
  std::vector<std::pair<int, int>> out;
  for (const auto& [x, y] : corners) {
    if (gw.cell_to_state[static_cast<std::size_t>(y) * w + x] >= 0) {
      out.emplace_back(x, y);
    }
  }
  return out;
}

// The standard goal suite: the four corners plus n_random further goal cells
// drawn uniformly without replacement from the remaining non-wall cells.
// Task names are "goal_<x>_<y>".
inline std::vector<NamedReward> standard_goal_suite(const GridWorld& gw,
                                                    int n_random,
                                                    std::uint64_t seed) {
  if (n_random < 0) {
    throw ContractError("standard_goal_suite: n_random must be >= 0");
  }
  std::vector<std::pair<int, int>> cells = corner_cells(gw);

  std::vector<std::pair<int, int>> pool;
  for (int y = 0; y < gw.spec.height; ++y) {
    for (int x = 0; x < gw.spec.width; ++x) {
      if (gw.cell_to_state[static_cast<std::size_t>(y) * gw.spec.width + x] <
          0) {
        continue;
      }
      bool is_corner = false;
      for (const auto& c : cells) {
        if (c.first == x && c.second == y) is_corner = true;
      }
      if (!is_corner) pool.emplace_back(x, y);
    }
  }
  if (n_random > static_cast<int>(pool.size())) {
    throw ContractError("standard_goal_suite: requested " +
                        std::to_string(n_random) + " random goals, only " +
                        std::to_string(pool.size()) + " non-corner cells");
  }

  Rng rng(seed);
  for (int k = 0; k < n_random; ++k) {
    const int j =
        k + rng.uniform_int(static_cast<int>(pool.size()) - k);
    std::swap(pool[static_cast<std::size_t>(k)],
              pool[static_cast<std::size_t>(j)]);
    cells.push_back(pool[static_cast<std::size_t>(k)]);
  }

  std::vector<NamedReward> suite;
  suite.reserve(cells.size());
  for (const auto& [x, y] : cells) {
    suite.push_back(NamedReward{
        "goal_" + std::to_string(x) + "_" + std::to_string(y),
        gw.goal_reward(x, y)});
  }
  return suite;
}

// ---------------------------------------------------------------------------
// Task specification strings
// ---------------------------------------------------------------------------

// One task spec, as accepted on the command line and in suite files:
//
//   goal:<x>,<y>     indicator reward at a grid cell
//   expr:<string>    arithmetic expression over state features
//   table:<path>     reward table file
inline RewardFn resolve_task_spec(const GridWorld& gw,
                                  const std::string& spec) {
  if (spec.rfind("goal:", 0) == 0) {
    const std::string args = spec.substr(5);
    const std::size_t comma = args.find(',');
    if (comma == std::string::npos) {
      throw ContractError("task spec '" + spec + "': expected goal:<x>,<y>");
    }
    const int x = static_cast<int>(
        parse_int(args.substr(0, comma), "goal x coordinate"));
    const int y = static_cast<int>(
        parse_int(args.substr(comma + 1), "goal y coordinate"));
    return gw.goal_reward(x, y);
  }
  if (spec.rfind("expr:", 0) == 0) {
    return reward_from_expr(gw.mdp, spec.substr(5));
  }
  if (spec.rfind("table:", 0) == 0) {
    RewardFn r = load_reward_table(spec.substr(6));
    r.validate(gw.mdp.n_states);
    return r;
  }
  throw ContractError("task spec '" + spec +
                      "': expected goal:<x>,<y>, expr:<...>, or table:<path>");
}

// A suite file is plain text: one task per line as "<name> <spec>", with
// blank lines and lines starting with '#' ignored.
inline std::vector<NamedReward> load_task_suite(const GridWorld& gw,
                                                const std::string& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<NamedReward> suite;
  while (std::getline(in, line)) {
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::string name, spec;
    if (!(ls >> name >> spec)) {
      throw ContractError("task suite: bad line '" + line + "'");
    }
    // Expressions may contain spaces; re-join the rest of the line.
    std::string rest;
    if (std::getline(ls, rest) &&
        rest.find_first_not_of(" \t\r") != std::string::npos) {
      spec += rest;
    }
    suite.push_back(NamedReward{name, resolve_task_spec(gw, spec)});
  }
  return suite;
}

}  // namespace fbrl

#endif  // FBRL_REWARDS_HPP_
