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
// Versioned model checkpoints: a self-describing container of named
// float64 arrays plus a string metadata record. Values are written as
// hexadecimal floats, so a save/load round trip is bit-exact and identical
// models produce identical files.
//
//   fbrl-ckpt v1
//   meta <count>
//   <key> <value ...>          one per line; the value is the line remainder
//   arrays <count>
//   array <name> <rows> <cols>
//   <hexfloat ...>             one line per row
//
// Keys and array names must be free of whitespace; metadata is stored
// sorted, arrays in insertion order.

#ifndef FBRL_CHECKPOINT_HPP_
#define FBRL_CHECKPOINT_HPP_

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fbrl/array.hpp"
#include "fbrl/common.hpp"
#include "fbrl/config.hpp"
#include "fbrl/fb_core.hpp"
#include "fbrl/mdp.hpp"
#include "fbrl/networks.hpp"

namespace fbrl {

inline constexpr const char* kCheckpointMagic = "fbrl-ckpt v1";

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Array2>> arrays;

  void add_array(const std::string& name, Array2 value) {
    if (find_array(name) != nullptr) {
      throw ContractError("checkpoint: duplicate array '" + name + "'");
    }
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
      throw ContractError("checkpoint: invalid array name '" + name + "'");
    }
    arrays.emplace_back(name, std::move(value));
  }

  const Array2* find_array(const std::string& name) const {
    for (const auto& [key, value] : arrays) {
      if (key == name) return &value;
    }
    return nullptr;
  }

  const Array2& require_array(const std::string& name, int rows,
                              int cols) const {
    const Array2* a = find_array(name);
    if (a == nullptr) {
      throw ContractError("checkpoint: missing array '" + name + "'");
    }
    if (a->rows != rows || a->cols != cols) {
      throw DimensionError(
          "checkpoint: array '" + name + "' is " + std::to_string(a->rows) +
          "x" + std::to_string(a->cols) + ", expected " + std::to_string(rows) +
          "x" + std::to_string(cols));
    }
    return *a;
  }

  const std::string& require_meta(const std::string& key) const {
    const auto it = meta.find(key);
    if (it == meta.end()) {
      throw ContractError("checkpoint: missing metadata '" + key + "'");
    }
    return it->second;
  }

  std::string to_text() const {
    std::ostringstream out;
    out << kCheckpointMagic << "\n";
    out << "meta " << meta.size() << "\n";
    for (const auto& [key, value] : meta) {
      if (key.empty() || key.find_first_of(" \t\n") != std::string::npos) {
        throw ContractError("checkpoint: invalid metadata key '" + key + "'");
      }
      if (value.find('\n') != std::string::npos) {
        throw ContractError("checkpoint: metadata '" + key +
                            "' contains a newline");
      }
      out << key << " " << value << "\n";
    }
    out << "arrays " << arrays.size() << "\n";
    for (const auto& [name, a] : arrays) {
      out << "array " << name << " " << a.rows << " " << a.cols << "\n";
      for (int r = 0; r < a.rows; ++r) {
        for (int c = 0; c < a.cols; ++c) {
          out << (c == 0 ? "" : " ") << format_hex(a.at(r, c));
        }
        out << "\n";
      }
    }
    return out.str();
  }

  static Checkpoint from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto next_line = [&](const char* what) {
      if (!std::getline(in, line)) {
        throw ContractError(std::string("checkpoint: truncated before ") +
                            what);
      }
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    };

    if (next_line("header") != kCheckpointMagic) {
      throw ContractError("checkpoint: bad header '" + line + "'");
    }

    Checkpoint ckpt;
    std::istringstream meta_head(next_line("meta count"));
    std::string word;
    long long n_meta = -1;
    if (!(meta_head >> word >> n_meta) || word != "meta" || n_meta < 0) {
      throw ContractError("checkpoint: bad meta count line '" + line + "'");
    }
    for (long long i = 0; i < n_meta; ++i) {
      const std::string& entry = next_line("metadata entry");
      const std::size_t cut = entry.find(' ');
      if (cut == std::string::npos || cut == 0) {
        throw ContractError("checkpoint: bad metadata line '" + entry + "'");
      }
      ckpt.meta[entry.substr(0, cut)] = entry.substr(cut + 1);
    }

    std::istringstream arr_head(next_line("array count"));
    long long n_arrays = -1;
    if (!(arr_head >> word >> n_arrays) || word != "arrays" || n_arrays < 0) {
      throw ContractError("checkpoint: bad array count line '" + line + "'");
    }
    for (long long i = 0; i < n_arrays; ++i) {
      std::istringstream head(next_line("array header"));
      std::string name;
      int rows = 0;
      int cols = 0;
      if (!(head >> word >> name >> rows >> cols) || word != "array" ||
          rows < 0 || cols < 0) {
        throw ContractError("checkpoint: bad array header '" + line + "'");
      }
      Array2 a(rows, cols, 0.0);
      for (int r = 0; r < rows; ++r) {
        std::istringstream row(next_line("array row"));
        for (int c = 0; c < cols; ++c) {
          std::string cell;
          if (!(row >> cell)) {
            throw ContractError("checkpoint: short row in array '" + name +
                                "'");
          }
          a.at(r, c) = parse_double(cell, "checkpoint value");
        }
        std::string extra;
        if (row >> extra) {
          throw ContractError("checkpoint: excess values in array '" + name +
                              "'");
        }
      }
      ckpt.add_array(name, std::move(a));
    }
    return ckpt;
  }

  void save(const std::string& path) const { write_text_file(path, to_text()); }

  static Checkpoint load(const std::string& path) {
    return from_text(read_text_file(path));
  }
};

// ---------------------------------------------------------------------------
// Model snapshot
// ---------------------------------------------------------------------------

// Stable (name, parameter) walk over every network in the model. Names are
// the per-network parameter names behind a network-role prefix, so the walk
// order and naming are independent of training history.
inline std::vector<std::pair<std::string, Parameter*>> named_model_params(
    FbModel& model) {
  std::vector<std::pair<std::string, Parameter*>> out;
  const auto add = [&out](const std::string& prefix,
                          std::vector<Parameter*> params) {
    for (Parameter* p : params) out.emplace_back(prefix + p->name, p);
  };
  for (std::size_t i = 0; i < model.f.members.size(); ++i) {
    add("f" + std::to_string(i) + ".", model.f.members[i].params());
  }
  for (std::size_t i = 0; i < model.f.targets.size(); ++i) {
    add("f_target" + std::to_string(i) + ".", model.f.targets[i].params());
  }
  add("b.", model.b.params());
  add("b_target.", model.b_target.params());
  add("pi.", model.pi.params());
  return out;
}

inline std::string block_sizes_csv(const std::vector<int>& sizes) {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(sizes[i]);
  }
  return out;
}

// Full snapshot: every network parameter (online and target), the dataset
// next-state distribution the model integrates against, the training
// configuration under config.* keys, and the architecture record.
inline Checkpoint checkpoint_from_model(FbModel& model) {
  Checkpoint ckpt;
  for (const auto& [key, value] : train_config_to_map(model.cfg)) {
    ckpt.meta["config." + key] = value;
  }
  ckpt.meta["d"] = std::to_string(model.d());
  ckpt.meta["k"] = std::to_string(model.cfg.k);
  ckpt.meta["block_sizes"] = block_sizes_csv(model.block_sizes());
  ckpt.meta["ensemble_m"] = std::to_string(model.f.size());
  ckpt.meta["hidden"] = std::to_string(model.cfg.hidden);
  ckpt.meta["state_dim"] = std::to_string(model.state_dim);
  ckpt.meta["n_states"] = std::to_string(model.n_states);
  ckpt.meta["n_actions"] = std::to_string(model.n_actions);
  ckpt.meta["mdp_id"] = model.mdp_id;

  ckpt.meta["config_hash"] = train_config_hash(model.cfg);

  for (const auto& [name, param] : named_model_params(model)) {
    ckpt.add_array(name, param->value);
  }
  Array2 rho(model.n_states, 1, 0.0);
  for (int s = 0; s < model.n_states; ++s) {
    rho.at(s, 0) = model.rho[static_cast<std::size_t>(s)];
  }
  ckpt.add_array("rho", std::move(rho));
  return ckpt;
}

// Overwrites every model parameter from the checkpoint's arrays (matched by
// name, shape-checked). Optimizer moments are not part of the snapshot.
inline void restore_model_params(FbModel& model, const Checkpoint& ckpt) {
  for (const auto& [name, param] : named_model_params(model)) {
    param->value = ckpt.require_array(name, param->value.rows,
                                      param->value.cols);
  }
}

// Rebuilds an inference/evaluation model from a checkpoint and the
// environment it was trained for. The dataset itself is not needed: the
// next-state distribution is restored from the snapshot. The anchor pool is
// left empty, so the result serves prompting and evaluation but cannot draw
// training tasks.
inline FbModel model_from_checkpoint(const Checkpoint& ckpt,
                                     const FiniteMdp& mdp) {
  TrainConfig cfg;
  bool saw_config = false;
  for (const auto& [key, value] : ckpt.meta) {
    if (key.rfind("config.", 0) == 0) {
      apply_config_entry(cfg, key.substr(7), value);
      saw_config = true;
    }
  }
  if (!saw_config) {
    throw ContractError("checkpoint: no config.* metadata");
  }
  cfg.validate();

  mdp.validate();
  if (ckpt.require_meta("mdp_id") != mdp.id) {
    throw ContractError("checkpoint was trained for environment '" +
                        ckpt.require_meta("mdp_id") + "', got '" + mdp.id +
                        "'");
  }
  if (ckpt.require_meta("n_states") != std::to_string(mdp.n_states) ||
      ckpt.require_meta("n_actions") != std::to_string(mdp.n_actions)) {
    throw ContractError("checkpoint: environment shape mismatch");
  }

  FbModel model;
  model.cfg = cfg;
  model.n_states = mdp.n_states;
  model.n_actions = mdp.n_actions;
  model.state_enc = state_encoding_matrix(mdp, cfg.encoding);
  model.state_dim = model.state_enc.cols;
  model.mdp_id = mdp.id;

  Rng net_rng = Rng(cfg.seed).split(0);
  model.f = build_forward_ensemble(cfg.ensemble_m, cfg.d, cfg.hidden,
                                   model.state_dim, mdp.n_actions, net_rng);
  model.b = build_backward_blocks(cfg.blocks(), cfg.hidden, model.state_dim,
                                  net_rng);
  model.b_target = model.b;
  model.pi = build_policy(cfg.d, cfg.hidden, model.state_dim, mdp.n_actions,
                          net_rng);

  const Array2& rho = ckpt.require_array("rho", mdp.n_states, 1);
  model.rho.resize(static_cast<std::size_t>(mdp.n_states));
  for (int s = 0; s < mdp.n_states; ++s) {
    model.rho[static_cast<std::size_t>(s)] = rho.at(s, 0);
  }
  restore_model_params(model, ckpt);
  return model;
}

}  // namespace fbrl

#endif  // FBRL_CHECKPOINT_HPP_
