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
// Command-line driver: dataset generation, training, task prompting,
// zero-shot evaluation, and ablation sweeps over gridworld environments.
//
// Exit codes: 0 success, 2 contract/config error, 3 numeric divergence,
// 4 I/O error.

#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fbrl/fbrl.hpp"

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitContract = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

// ---------------------------------------------------------------------------
// Environment flags
// ---------------------------------------------------------------------------

struct EnvOptions {
  std::string grid = "5x5";
  double slip = 0.1;
  double gamma = 0.95;
  std::vector<std::string> walls;
};

void add_env_flags(CLI::App* cmd, EnvOptions& env) {
  cmd->add_option("--grid", env.grid, "gridworld size as WxH")
      ->capture_default_str();
  cmd->add_option("--slip", env.slip, "probability of a random move")
      ->capture_default_str();
  cmd->add_option("--env-gamma", env.gamma, "environment discount")
      ->capture_default_str();
  cmd->add_option("--wall", env.walls, "blocked cell as x,y (repeatable)");
}

std::pair<int, int> parse_cell(const std::string& text, const char* what) {
  const std::size_t comma = text.find(',');
  if (comma == std::string::npos) {
    throw fbrl::ContractError(std::string(what) + " must look like x,y: '" +
                              text + "'");
  }
  return {static_cast<int>(fbrl::parse_int(text.substr(0, comma), what)),
          static_cast<int>(fbrl::parse_int(text.substr(comma + 1), what))};
}

fbrl::GridSpec grid_spec_from(const EnvOptions& env) {
  fbrl::GridSpec spec;
  const std::size_t x = env.grid.find('x');
  if (x == std::string::npos) {
    throw fbrl::ContractError("--grid must look like WxH: '" + env.grid + "'");
  }
  spec.width = static_cast<int>(fbrl::parse_int(env.grid.substr(0, x), "grid"));
  spec.height =
      static_cast<int>(fbrl::parse_int(env.grid.substr(x + 1), "grid"));
  spec.slip_prob = env.slip;
  spec.gamma = env.gamma;
  for (const std::string& wall : env.walls) {
    spec.walls.push_back(parse_cell(wall, "--wall"));
  }
  return spec;
}

// The environment is echoed into checkpoints so that prompting and
// evaluation rebuild it without repeating the flags.
void stamp_env_meta(fbrl::Checkpoint& ckpt, const fbrl::GridSpec& spec) {
  ckpt.meta["env.kind"] = "grid";
  ckpt.meta["env.width"] = std::to_string(spec.width);
  ckpt.meta["env.height"] = std::to_string(spec.height);
  ckpt.meta["env.slip"] = fbrl::format_g17(spec.slip_prob);
  ckpt.meta["env.gamma"] = fbrl::format_g17(spec.gamma);
  std::string walls;
  for (const auto& [x, y] : spec.walls) {
    if (!walls.empty()) walls += ";";
    walls += std::to_string(x) + "," + std::to_string(y);
  }
  ckpt.meta["env.walls"] = walls.empty() ? "-" : walls;
}

fbrl::GridWorld gridworld_from_meta(const fbrl::Checkpoint& ckpt) {
  if (ckpt.require_meta("env.kind") != "grid") {
    throw fbrl::ContractError("checkpoint holds an unsupported environment '" +
                              ckpt.require_meta("env.kind") + "'");
  }
  fbrl::GridSpec spec;
  spec.width = static_cast<int>(
      fbrl::parse_int(ckpt.require_meta("env.width"), "env.width"));
  spec.height = static_cast<int>(
      fbrl::parse_int(ckpt.require_meta("env.height"), "env.height"));
  spec.slip_prob = fbrl::parse_double(ckpt.require_meta("env.slip"),
                                      "env.slip");
  spec.gamma = fbrl::parse_double(ckpt.require_meta("env.gamma"), "env.gamma");
  const std::string& walls = ckpt.require_meta("env.walls");
  if (walls != "-") {
    std::size_t at = 0;
    while (at < walls.size()) {
      std::size_t end = walls.find(';', at);
      if (end == std::string::npos) end = walls.size();
      spec.walls.push_back(parse_cell(walls.substr(at, end - at),
                                      "env.walls"));
      at = end + 1;
    }
  }
  return fbrl::build_gridworld(spec);
}

// ---------------------------------------------------------------------------
// Shared report plumbing
// ---------------------------------------------------------------------------

std::string config_echo_comment(const fbrl::TrainConfig& cfg) {
  std::string out = "# config_hash " + fbrl::train_config_hash(cfg) + "\n";
  for (const auto& [key, value] : fbrl::train_config_to_map(cfg)) {
    out += "# " + key + " " + value + "\n";
  }
  return out;
}

json config_json(const fbrl::TrainConfig& cfg) {
  json out = json::object();
  for (const auto& [key, value] : fbrl::train_config_to_map(cfg)) {
    out[key] = value;
  }
  return out;
}

void check_dataset_matches(const fbrl::OfflineDataset& ds,
                           const fbrl::FiniteMdp& mdp,
                           const std::string& data_path) {
  if (ds.source_mdp_id != mdp.id) {
    throw fbrl::ContractError(
        "dataset " + data_path + " was collected on environment '" +
        ds.source_mdp_id + "', but the flags describe '" + mdp.id +
        "' (check --grid/--slip/--env-gamma/--wall)");
  }
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataArgs {
  EnvOptions env;
  std::string collector = "uniform";
  int n = 20000;
  int mood_goals = 2;
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& args) {
  const fbrl::GridWorld gw = fbrl::build_gridworld(grid_spec_from(args.env));
  fbrl::OfflineDataset ds;
  if (args.collector == "uniform") {
    ds = fbrl::collect_uniform(gw.mdp, args.n, args.seed);
  } else if (args.collector == "mood") {
    const auto corners = fbrl::corner_cells(gw);
    if (args.mood_goals < 1 ||
        args.mood_goals > static_cast<int>(corners.size())) {
      throw fbrl::ContractError("--mood-goals must lie in [1, " +
                                std::to_string(corners.size()) + "]");
    }
    std::vector<fbrl::RewardFn> rewards;
    for (int g = 0; g < args.mood_goals; ++g) {
      rewards.push_back(gw.goal_reward(corners[static_cast<std::size_t>(g)]
                                           .first,
                                       corners[static_cast<std::size_t>(g)]
                                           .second));
    }
    const int steps_per_task = args.n / args.mood_goals;
    if (steps_per_task < 1) {
      throw fbrl::ContractError("--n too small for the requested goals");
    }
    ds = fbrl::collect_mood(gw.mdp, rewards, steps_per_task,
                            {args.eps_start, args.eps_end}, args.seed);
  } else {
    throw fbrl::ContractError("unknown collector '" + args.collector +
                              "' (expected uniform or mood)");
  }

  fbrl::save_dataset(args.out, ds);

  std::printf("dataset: %s\n", args.out.c_str());
  std::printf("transitions: %zu  states: %d  actions: %d  seed: %llu\n",
              ds.transitions.size(), ds.n_states, ds.n_actions,
              static_cast<unsigned long long>(ds.seed));
  std::printf("next-state coverage:\n");
  std::vector<long long> counts(static_cast<std::size_t>(ds.n_states), 0);
  for (const fbrl::Transition& t : ds.transitions) {
    ++counts[static_cast<std::size_t>(t.s_next)];
  }
  for (int s = 0; s < ds.n_states; ++s) {
    const double pct = 100.0 * static_cast<double>(counts[
        static_cast<std::size_t>(s)]) /
        static_cast<double>(ds.transitions.size());
    std::printf("  state %3d: %8lld (%5.2f%%)\n", s,
                counts[static_cast<std::size_t>(s)], pct);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  EnvOptions env;
  std::string config;
  std::string data;
  std::string out;
  std::string loss_csv;
  std::string variant;
  int blocks = 0;
  std::vector<std::string> sets;
};

int cmd_train(const TrainArgs& args) {
  fbrl::TrainConfig cfg = fbrl::load_train_config(args.config);
  for (const std::string& kv : args.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw fbrl::ContractError("--set expects key=value, got '" + kv + "'");
    }
    fbrl::apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!args.variant.empty()) cfg.variant = fbrl::parse_variant(args.variant);
  if (args.blocks > 0) cfg.k = args.blocks;

  const fbrl::GridSpec spec = grid_spec_from(args.env);
  const fbrl::GridWorld gw = fbrl::build_gridworld(spec);
  const fbrl::OfflineDataset ds = fbrl::load_dataset(args.data);
  check_dataset_matches(ds, gw.mdp, args.data);

  std::printf("training %s: d=%d k=%d steps=%lld seed=%llu\n",
              fbrl::variant_name(cfg.variant), cfg.d, cfg.k, cfg.steps,
              static_cast<unsigned long long>(cfg.seed));
  fbrl::TrainResult result = fbrl::train(
      cfg, ds, gw.mdp, [](fbrl::FbModel&, const fbrl::FbLossRow& row) {
        std::printf("  step %6lld  fb %.6f  ortho %.6f  actor %.6f\n",
                    row.step, row.fb_loss, row.ortho_loss, row.actor_loss);
        std::fflush(stdout);
      });

  fbrl::Checkpoint ckpt = fbrl::checkpoint_from_model(result.model);
  stamp_env_meta(ckpt, spec);
  ckpt.meta["dataset_path"] = args.data;
  ckpt.save(args.out);

  const std::string loss_path =
      args.loss_csv.empty() ? args.out + ".loss.csv" : args.loss_csv;
  fbrl::write_text_file(loss_path, config_echo_comment(cfg) +
                                       fbrl::loss_report_csv(result.report));

  std::printf("checkpoint: %s (config %s)\n", args.out.c_str(),
              ckpt.meta.at("config_hash").c_str());
  std::printf("loss report: %s\n", loss_path.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// prompt
// ---------------------------------------------------------------------------

struct PromptArgs {
  std::string ckpt;
  std::string task;
  std::string out;
};

int cmd_prompt(const PromptArgs& args) {
  const fbrl::Checkpoint ckpt = fbrl::Checkpoint::load(args.ckpt);
  const fbrl::GridWorld gw = gridworld_from_meta(ckpt);
  fbrl::FbModel model = fbrl::model_from_checkpoint(ckpt, gw.mdp);

  const fbrl::RewardFn r = fbrl::resolve_task_spec(gw, args.task);
  const std::vector<fbrl::RewardSample> samples =
      fbrl::reward_samples_exact(r, model.rho);
  const fbrl::InferredTask task =
      fbrl::infer_task(model.b, model.state_enc, samples);
  const double residual = fbrl::fixed_point_residual(
      model.b, model.state_enc, samples, task.z_raw);

  std::string text = "fbrl-task v1\n";
  text += "task " + args.task + "\n";
  text += "d " + std::to_string(task.z.d()) + "\n";
  text += "blocks " + fbrl::block_sizes_csv(task.z.block_sizes) + "\n";
  text += "residual " + fbrl::format_g17(residual) + "\n";
  auto hex_line = [](const char* key, const std::vector<double>& v) {
    std::string line = key;
    for (double x : v) line += std::string(" ") + fbrl::format_hex(x);
    return line + "\n";
  };
  text += hex_line("z", task.z.z);
  text += hex_line("z_raw", task.z_raw.z);
  if (!args.out.empty()) fbrl::write_text_file(args.out, text);

  std::printf("task: %s\n", args.task.c_str());
  std::printf("blocks: %s  (d = %d)\n",
              fbrl::block_sizes_csv(task.z.block_sizes).c_str(), task.z.d());
  std::printf("fixed-point residual: %.3g\n", residual);
  if (!args.out.empty()) std::printf("written: %s\n", args.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string suite;
  std::string data;
  std::vector<std::uint64_t> seeds = {1};
  int episodes = 100;
  int horizon = 200;
  int es_samples = 0;  // 0: use the trained configuration's value
  std::string out_csv;
  std::string out_json;
};

int cmd_eval(const EvalArgs& args) {
  const fbrl::Checkpoint ckpt = fbrl::Checkpoint::load(args.ckpt);
  const fbrl::GridWorld gw = gridworld_from_meta(ckpt);
  fbrl::FbModel model = fbrl::model_from_checkpoint(ckpt, gw.mdp);
  const fbrl::OfflineDataset ds = fbrl::load_dataset(args.data);
  check_dataset_matches(ds, gw.mdp, args.data);

  const std::vector<fbrl::NamedReward> suite =
      fbrl::load_task_suite(gw, args.suite);
  fbrl::EvalSubject subject = fbrl::make_eval_subject(model, ds);

  fbrl::EvalOptions opt;
  opt.episodes = args.episodes;
  opt.horizon = args.horizon;
  opt.es_samples =
      args.es_samples > 0 ? args.es_samples : model.cfg.es_samples;

  std::vector<fbrl::EvalRow> rows;
  for (std::uint64_t seed : args.seeds) {
    opt.seed = seed;
    for (const fbrl::NamedReward& task : suite) {
      rows.push_back(
          fbrl::evaluate_task(subject, gw.mdp, task, args.data, opt));
    }
  }

  if (!args.out_csv.empty()) {
    fbrl::write_text_file(args.out_csv, config_echo_comment(model.cfg) +
                                            fbrl::eval_report_csv(rows));
  }

  const std::vector<fbrl::EvalGroupSummary> summary =
      fbrl::summarize_eval_rows(rows);
  if (!args.out_json.empty()) {
    json report;
    report["config"] = config_json(model.cfg);
    report["config_hash"] = fbrl::train_config_hash(model.cfg);
    report["checkpoint"] = args.ckpt;
    report["dataset"] = args.data;
    report["suite"] = args.suite;
    report["seeds"] = args.seeds;
    report["episodes"] = args.episodes;
    report["horizon"] = args.horizon;
    report["rows"] = json::array();
    for (const fbrl::EvalRow& r : rows) {
      report["rows"].push_back({{"variant", r.variant},
                                {"dataset", r.dataset},
                                {"task", r.task},
                                {"seed", r.seed},
                                {"return", r.ret},
                                {"optimal", r.optimal},
                                {"ratio", r.ratio},
                                {"q_err", r.q_err},
                                {"m_err", r.m_err},
                                {"m_floor", r.m_floor},
                                {"random_ratio", r.random_ratio}});
    }
    report["summary"] = json::array();
    for (const fbrl::EvalGroupSummary& s : summary) {
      report["summary"].push_back({{"variant", s.variant},
                                   {"task", s.task},
                                   {"n_seeds", s.n_seeds},
                                   {"ratio_mean", s.ratio_mean},
                                   {"ratio_std", s.ratio_std},
                                   {"q_err_mean", s.q_err_mean},
                                   {"m_err_mean", s.m_err_mean}});
    }
    fbrl::write_text_file(args.out_json, report.dump(2) + "\n");
  }

  std::printf("evaluated %zu tasks x %zu seeds\n", suite.size(),
              args.seeds.size());
  for (const fbrl::EvalGroupSummary& s : summary) {
    if (!s.task.empty()) continue;
    std::printf("%s: ratio %.4f +/- %.4f over %d seeds\n", s.variant.c_str(),
                s.ratio_mean, s.ratio_std, s.n_seeds);
  }
  if (!args.out_csv.empty()) std::printf("csv: %s\n", args.out_csv.c_str());
  if (!args.out_json.empty()) std::printf("json: %s\n", args.out_json.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
  EnvOptions env;
  std::string config;
  std::string data;
  std::string suite;
  std::string axis;
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds = {1};
  int jobs = 1;
  int episodes = 100;
  int horizon = 200;
  std::string outdir;
};

std::string self_exe_path(const char* argv0) {
  char buf[4096];
  const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n > 0) {
    buf[n] = '\0';
    return buf;
  }
  return argv0;
}

// Bounded process pool: one child per work item, at most `jobs` at once.
// Returns each item's exit code (127 on exec failure, -1 on abnormal
// termination).
std::vector<int> run_pool(const std::vector<std::vector<std::string>>& cmds,
                          int jobs) {
  std::vector<int> codes(cmds.size(), -1);
  std::map<pid_t, std::size_t> running;
  std::size_t next = 0;
  const std::size_t cap = jobs < 1 ? 1 : static_cast<std::size_t>(jobs);

  const auto launch = [&](std::size_t i) {
    std::vector<char*> argv;
    for (const std::string& a : cmds[i]) {
      argv.push_back(const_cast<char*>(a.c_str()));
    }
    argv.push_back(nullptr);
    // A buffered parent stdout would be cloned into (and re-flushed by)
    // the child.
    std::fflush(stdout);
    const pid_t pid = ::fork();
    if (pid < 0) throw fbrl::IoError("fork failed");
    if (pid == 0) {
      ::execv(argv[0], argv.data());
      std::perror("execv");
      ::_exit(127);
    }
    running[pid] = i;
  };

  while (next < cmds.size() || !running.empty()) {
    while (next < cmds.size() && running.size() < cap) launch(next++);
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    if (pid < 0) throw fbrl::IoError("waitpid failed");
    const auto it = running.find(pid);
    if (it == running.end()) continue;
    codes[it->second] = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    running.erase(it);
  }
  return codes;
}

int cmd_sweep(const SweepArgs& args, const char* argv0) {
  static const std::vector<std::string> kAxes = {"d", "blocks", "variant",
                                                 "tau_mix", "beta"};
  if (std::find(kAxes.begin(), kAxes.end(), args.axis) == kAxes.end()) {
    throw fbrl::ContractError(
        "--axis must be one of d, blocks, variant, tau_mix, beta");
  }
  if (args.values.empty()) {
    throw fbrl::ContractError("--values must list at least one setting");
  }
  std::filesystem::create_directories(args.outdir);
  const std::string self = self_exe_path(argv0);

  // Per-value child configs: the base file plus the swept key. Sweeping the
  // variant away from `aware` also forces k = 1, which those variants
  // require. A value the config contract rejects outright is recorded as a
  // failed row, not a failed sweep.
  std::vector<std::string> cfg_paths, ckpt_paths, json_paths;
  std::vector<bool> rejected(args.values.size(), false);
  std::string seeds_csv;
  for (std::size_t i = 0; i < args.seeds.size(); ++i) {
    if (i > 0) seeds_csv += ",";
    seeds_csv += std::to_string(args.seeds[i]);
  }
  for (std::size_t i = 0; i < args.values.size(); ++i) {
    const std::string& value = args.values[i];
    const std::string stem = args.outdir + "/" + args.axis + "_" + value;
    cfg_paths.push_back(stem + ".cfg");
    ckpt_paths.push_back(stem + ".ckpt");
    json_paths.push_back(stem + ".eval.json");

    fbrl::TrainConfig cfg = fbrl::load_train_config(args.config);
    const std::string key = args.axis == "blocks" ? "k" : args.axis;
    try {
      fbrl::apply_config_entry(cfg, key, value);
      if (args.axis == "variant" && value != "aware") {
        fbrl::apply_config_entry(cfg, "k", "1");
      }
      cfg.validate();
    } catch (const fbrl::Error& e) {
      std::printf("sweep %s=%s rejected: %s\n", args.axis.c_str(),
                  value.c_str(), e.what());
      rejected[i] = true;
      continue;
    }
    fbrl::save_train_config(cfg, stem + ".cfg");
  }

  const auto env_flags = [&args]() {
    std::vector<std::string> flags = {"--grid", args.env.grid,
                                      "--slip", fbrl::format_g17(args.env.slip),
                                      "--env-gamma",
                                      fbrl::format_g17(args.env.gamma)};
    for (const std::string& wall : args.env.walls) {
      flags.push_back("--wall");
      flags.push_back(wall);
    }
    return flags;
  }();

  std::vector<std::vector<std::string>> train_cmds;
  std::vector<std::size_t> train_index;
  for (std::size_t i = 0; i < args.values.size(); ++i) {
    if (rejected[i]) continue;
    std::vector<std::string> cmd = {self,          "train",
                                    "--config",    cfg_paths[i],
                                    "--data",      args.data,
                                    "--out",       ckpt_paths[i]};
    cmd.insert(cmd.end(), env_flags.begin(), env_flags.end());
    train_cmds.push_back(std::move(cmd));
    train_index.push_back(i);
  }
  std::printf("sweep %s: training %zu settings (%d at a time)\n",
              args.axis.c_str(), train_cmds.size(), args.jobs);
  const std::vector<int> pool_codes = run_pool(train_cmds, args.jobs);
  std::vector<int> train_codes(args.values.size(), kExitContract);
  for (std::size_t j = 0; j < train_index.size(); ++j) {
    train_codes[train_index[j]] = pool_codes[j];
  }

  std::vector<std::vector<std::string>> eval_cmds;
  std::vector<std::size_t> eval_index;
  for (std::size_t i = 0; i < args.values.size(); ++i) {
    if (train_codes[i] != 0) continue;
    eval_cmds.push_back({self, "eval", "--ckpt", ckpt_paths[i], "--suite",
                         args.suite, "--data", args.data, "--seeds", seeds_csv,
                         "--episodes", std::to_string(args.episodes),
                         "--horizon", std::to_string(args.horizon),
                         "--out-csv", args.outdir + "/" + args.axis + "_" +
                             args.values[i] + ".eval.csv",
                         "--out-json", json_paths[i]});
    eval_index.push_back(i);
  }
  std::printf("sweep %s: evaluating %zu settings\n", args.axis.c_str(),
              eval_cmds.size());
  const std::vector<int> eval_codes = run_pool(eval_cmds, args.jobs);

  std::vector<int> final_codes(args.values.size(), -1);
  for (std::size_t i = 0; i < args.values.size(); ++i) {
    final_codes[i] = train_codes[i];
  }
  for (std::size_t j = 0; j < eval_index.size(); ++j) {
    final_codes[eval_index[j]] = eval_codes[j];
  }

  // Comparison table across settings, one row per swept value.
  std::string table = "axis,value,status,ratio_mean,ratio_std\n";
  std::printf("%-10s %-10s %-8s %-12s %s\n", "axis", "value", "status",
              "ratio_mean", "ratio_std");
  for (std::size_t i = 0; i < args.values.size(); ++i) {
    std::string status = "ok";
    std::string mean = "";
    std::string std_dev = "";
    if (final_codes[i] != 0) {
      status = "failed(" + std::to_string(final_codes[i]) + ")";
    } else {
      const json report = json::parse(fbrl::read_text_file(json_paths[i]));
      for (const json& group : report.at("summary")) {
        if (!group.at("task").get<std::string>().empty()) continue;
        mean = fbrl::format_g17(group.at("ratio_mean").get<double>());
        std_dev = fbrl::format_g17(group.at("ratio_std").get<double>());
      }
    }
    table += args.axis + "," + args.values[i] + "," + status + "," + mean +
             "," + std_dev + "\n";
    std::printf("%-10s %-10s %-8s %-12s %s\n", args.axis.c_str(),
                args.values[i].c_str(), status.c_str(), mean.c_str(),
                std_dev.c_str());
  }
  const std::string table_path = args.outdir + "/sweep.csv";
  fbrl::write_text_file(table_path, table);
  std::printf("table: %s\n", table_path.c_str());
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------
// main
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  CLI::App app{"forward-backward behavior foundation models on finite MDPs"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "collect an offline dataset");
  add_env_flags(gen, gen_args.env);
  gen->add_option("--collector", gen_args.collector, "uniform or mood")
      ->capture_default_str();
  gen->add_option("--n", gen_args.n, "transition count")
      ->capture_default_str();
  gen->add_option("--mood-goals", gen_args.mood_goals,
                  "corner goals for the mood collector")
      ->capture_default_str();
  gen->add_option("--eps-start", gen_args.eps_start,
                  "initial exploration rate (mood)")
      ->capture_default_str();
  gen->add_option("--eps-end", gen_args.eps_end,
                  "final exploration rate (mood)")
      ->capture_default_str();
  gen->add_option("--seed", gen_args.seed, "collection seed")
      ->capture_default_str();
  gen->add_option("--out", gen_args.out, "output dataset path")->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model offline");
  add_env_flags(train, train_args.env);
  train->add_option("--config", train_args.config, "config file")->required();
  train->add_option("--data", train_args.data, "dataset path")->required();
  train->add_option("--out", train_args.out, "output checkpoint")->required();
  train->add_option("--loss-csv", train_args.loss_csv,
                    "loss report path (default: <out>.loss.csv)");
  train->add_option("--variant", train_args.variant,
                    "override: vanilla, aw, or aware");
  train->add_option("--blocks", train_args.blocks,
                    "override: autoregressive blocks");
  train->add_option("--set", train_args.sets,
                    "override any config key as key=value (repeatable)");

  PromptArgs prompt_args;
  CLI::App* prompt =
      app.add_subcommand("prompt", "infer a task vector for a reward");
  prompt->add_option("--ckpt", prompt_args.ckpt, "checkpoint path")
      ->required();
  prompt->add_option("--task", prompt_args.task,
                     "goal:x,y | expr:<expression> | table:<file>")
      ->required();
  prompt->add_option("--out", prompt_args.out, "output task-vector file");

  EvalArgs eval_args;
  CLI::App* eval =
      app.add_subcommand("eval", "zero-shot evaluation over a task suite");
  eval->add_option("--ckpt", eval_args.ckpt, "checkpoint path")->required();
  eval->add_option("--suite", eval_args.suite, "task suite file")->required();
  eval->add_option("--data", eval_args.data,
                   "dataset path (task-inference samples)")
      ->required();
  eval->add_option("--seeds", eval_args.seeds, "rollout seeds")
      ->delimiter(',')
      ->capture_default_str();
  eval->add_option("--episodes", eval_args.episodes, "episodes per task")
      ->capture_default_str();
  eval->add_option("--horizon", eval_args.horizon, "steps per episode")
      ->capture_default_str();
  eval->add_option("--es-samples", eval_args.es_samples,
                   "policy draws per action (0: trained value)");
  eval->add_option("--out-csv", eval_args.out_csv, "report CSV path");
  eval->add_option("--out-json", eval_args.out_json, "report JSON path");

  SweepArgs sweep_args;
  CLI::App* sweep =
      app.add_subcommand("sweep", "train + eval across one config axis");
  add_env_flags(sweep, sweep_args.env);
  sweep->add_option("--config", sweep_args.config, "base config file")
      ->required();
  sweep->add_option("--data", sweep_args.data, "dataset path")->required();
  sweep->add_option("--suite", sweep_args.suite, "task suite file")
      ->required();
  sweep->add_option("--axis", sweep_args.axis,
                    "d, blocks, variant, tau_mix, or beta")
      ->required();
  sweep->add_option("--values", sweep_args.values, "settings to sweep")
      ->delimiter(',')
      ->required();
  sweep->add_option("--seeds", sweep_args.seeds, "evaluation seeds")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--jobs", sweep_args.jobs, "parallel children")
      ->capture_default_str();
  sweep->add_option("--episodes", sweep_args.episodes, "episodes per task")
      ->capture_default_str();
  sweep->add_option("--horizon", sweep_args.horizon, "steps per episode")
      ->capture_default_str();
  sweep->add_option("--outdir", sweep_args.outdir, "artifact directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitContract;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_args);
    if (train->parsed()) return cmd_train(train_args);
    if (prompt->parsed()) return cmd_prompt(prompt_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args, argv[0]);
  } catch (const fbrl::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const fbrl::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const fbrl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitContract;
  }
  return kExitContract;
}
