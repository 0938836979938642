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

#include <catch2/catch_amalgamated.hpp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "fbrl/checkpoint.hpp"
#include "fbrl/config.hpp"

using fbrl::Array2;
using fbrl::Checkpoint;
using fbrl::ContractError;
using fbrl::DimensionError;
using fbrl::FbModel;
using fbrl::GridSpec;
using fbrl::GridWorld;
using fbrl::IoError;
using fbrl::OfflineDataset;
using fbrl::Rng;
using fbrl::TrainConfig;

namespace {

std::string write_temp(const std::string& stem, const std::string& text) {
  const std::string path = "/tmp/fbrl_fmt_" + stem;
  fbrl::write_text_file(path, text);
  return path;
}

GridWorld make_grid() {
  GridSpec spec;
  spec.width = 3;
  spec.height = 3;
  spec.slip_prob = 0.1;
  return fbrl::build_gridworld(spec);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.d = 4;
  cfg.k = 2;
  cfg.hidden = 12;
  cfg.ensemble_m = 2;
  cfg.seed = 11;
  return cfg;
}

FbModel make_model(const GridWorld& gw, const OfflineDataset& ds) {
  return fbrl::init_model(small_config(), ds, gw.mdp);
}

// Scrambles every parameter so restored values are distinguishable from the
// deterministic initialization.
void scramble_params(FbModel& model, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& [name, param] : fbrl::named_model_params(model)) {
    param->value =
        Array2::uniform(param->value.rows, param->value.cols, -2.0, 2.0, rng);
  }
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Checkpoint container
// ---------------------------------------------------------------------------

TEST_CASE("checkpoint text round-trips bit-exactly", "[checkpoint]") {
  Checkpoint ckpt;
  ckpt.meta["note"] = "two words";
  ckpt.meta["config.d"] = "4";
  Array2 values(2, 3, 0.0);
  values.at(0, 0) = 1.0 / 3.0;
  values.at(0, 1) = -0.0;
  values.at(0, 2) = 1e-300;
  values.at(1, 0) = 3.141592653589793;
  values.at(1, 1) = -2.5e17;
  values.at(1, 2) = 0x1.fffffffffffffp+1;
  ckpt.add_array("w", values);

  const Checkpoint back = Checkpoint::from_text(ckpt.to_text());
  CHECK(back.meta.at("note") == "two words");
  const Array2* w = back.find_array("w");
  REQUIRE(w != nullptr);
  for (std::size_t i = 0; i < values.size(); ++i) {
    CHECK(same_bits(w->data[i], values.data[i]));
  }
  CHECK(back.to_text() == ckpt.to_text());
}

TEST_CASE("checkpoint rejects malformed content", "[checkpoint]") {
  CHECK_THROWS_AS(Checkpoint::from_text("bogus\n"), ContractError);
  CHECK_THROWS_AS(Checkpoint::from_text("fbrl-ckpt v1\nmeta 1\n"),
                  ContractError);
  CHECK_THROWS_AS(
      Checkpoint::from_text("fbrl-ckpt v1\nmeta 0\narrays 1\narray w 1 2\n"
                            "0x1p+0\n"),
      ContractError);  // short row
  CHECK_THROWS_AS(
      Checkpoint::from_text("fbrl-ckpt v1\nmeta 0\narrays 1\narray w 1 1\n"
                            "0x1p+0 0x1p+0\n"),
      ContractError);  // excess values
  CHECK_THROWS_AS(
      Checkpoint::from_text("fbrl-ckpt v1\nmeta 0\narrays 1\nrow w 1 1\n"),
      ContractError);  // bad array header

  Checkpoint dup;
  dup.add_array("w", Array2(1, 1, 0.0));
  CHECK_THROWS_AS(dup.add_array("w", Array2(1, 1, 0.0)), ContractError);
  CHECK_THROWS_AS(dup.add_array("bad name", Array2(1, 1, 0.0)),
                  ContractError);

  Checkpoint bad_meta;
  bad_meta.meta["key"] = "line\nbreak";
  CHECK_THROWS_AS(bad_meta.to_text(), ContractError);

  Checkpoint bad_key;
  bad_key.meta["two words"] = "v";
  CHECK_THROWS_AS(bad_key.to_text(), ContractError);

  CHECK_THROWS_AS(dup.require_array("missing", 1, 1), ContractError);
  CHECK_THROWS_AS(dup.require_array("w", 2, 1), DimensionError);
  CHECK_THROWS_AS(dup.require_meta("absent"), ContractError);
}

TEST_CASE("model checkpoints are deterministic and self-describing",
          "[checkpoint]") {
  const GridWorld gw = make_grid();
  const OfflineDataset ds = fbrl::collect_uniform(gw.mdp, 400, 3);
  FbModel model = make_model(gw, ds);
  scramble_params(model, 99);

  const Checkpoint ckpt = fbrl::checkpoint_from_model(model);
  CHECK(ckpt.meta.at("d") == "4");
  CHECK(ckpt.meta.at("k") == "2");
  CHECK(ckpt.meta.at("block_sizes") == "2,2");
  CHECK(ckpt.meta.at("ensemble_m") == "2");
  CHECK(ckpt.meta.at("n_states") == "9");
  CHECK(ckpt.meta.at("n_actions") == "4");
  CHECK(ckpt.meta.at("mdp_id") == gw.mdp.id);
  CHECK(ckpt.meta.at("config_hash") ==
        fbrl::train_config_hash(model.cfg));
  CHECK(ckpt.meta.at("config.variant") == "aware");
  CHECK(ckpt.find_array("rho") != nullptr);

  // Identical model, identical file.
  const Checkpoint again = fbrl::checkpoint_from_model(model);
  CHECK(again.to_text() == ckpt.to_text());

  // Save/load round trip through disk.
  const std::string path = write_temp("model.ckpt", ckpt.to_text());
  const Checkpoint loaded = Checkpoint::load(path);
  CHECK(loaded.to_text() == ckpt.to_text());
  std::remove(path.c_str());
}

TEST_CASE("restored models reproduce the saved one bit for bit",
          "[checkpoint]") {
  const GridWorld gw = make_grid();
  const OfflineDataset ds = fbrl::collect_uniform(gw.mdp, 400, 3);
  FbModel model = make_model(gw, ds);
  scramble_params(model, 42);
  const Checkpoint ckpt =
      Checkpoint::from_text(fbrl::checkpoint_from_model(model).to_text());

  FbModel restored = fbrl::model_from_checkpoint(ckpt, gw.mdp);
  const auto original = fbrl::named_model_params(model);
  const auto recovered = fbrl::named_model_params(restored);
  REQUIRE(original.size() == recovered.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    CHECK(original[i].first == recovered[i].first);
    CHECK(original[i].second->value.data == recovered[i].second->value.data);
  }
  CHECK(restored.rho == model.rho);
  CHECK(restored.state_enc.data == model.state_enc.data);

  // The restored model computes identical features.
  const fbrl::TaskVector z =
      fbrl::normalize_z(fbrl::TaskVector{{0.3, -1.2, 0.7, 2.0}, {2, 2}});
  CHECK(restored.backward_table(z).data == model.backward_table(z).data);
  CHECK(restored.q_mean_table(z).data == model.q_mean_table(z).data);
}

TEST_CASE("restore rejects mismatched environments and missing data",
          "[checkpoint]") {
  const GridWorld gw = make_grid();
  const OfflineDataset ds = fbrl::collect_uniform(gw.mdp, 400, 3);
  FbModel model = make_model(gw, ds);
  const Checkpoint ckpt = fbrl::checkpoint_from_model(model);

  GridSpec other_spec;
  other_spec.width = 4;
  other_spec.height = 3;
  other_spec.slip_prob = 0.1;
  const GridWorld other = fbrl::build_gridworld(other_spec);
  CHECK_THROWS_WITH(fbrl::model_from_checkpoint(ckpt, other.mdp),
                    Catch::Matchers::ContainsSubstring("environment"));

  Checkpoint no_config = ckpt;
  for (auto it = no_config.meta.begin(); it != no_config.meta.end();) {
    it = it->first.rfind("config.", 0) == 0 ? no_config.meta.erase(it)
                                            : std::next(it);
  }
  CHECK_THROWS_WITH(fbrl::model_from_checkpoint(no_config, gw.mdp),
                    Catch::Matchers::ContainsSubstring("config"));

  Checkpoint no_rho = ckpt;
  no_rho.arrays.erase(no_rho.arrays.end() - 1);  // rho is added last
  CHECK_THROWS_WITH(fbrl::model_from_checkpoint(no_rho, gw.mdp),
                    Catch::Matchers::ContainsSubstring("rho"));

  // A parameter array of the wrong shape is a dimension error.
  Checkpoint bad_shape = ckpt;
  bad_shape.arrays[0].second = Array2(1, 1, 0.0);
  CHECK_THROWS_AS(fbrl::model_from_checkpoint(bad_shape, gw.mdp),
                  DimensionError);
}

// ---------------------------------------------------------------------------
// Config files
// ---------------------------------------------------------------------------

TEST_CASE("config files parse keys, comments, and overrides", "[config]") {
  const std::string path = write_temp("basic.cfg",
                                      "# a comment\n"
                                      "\n"
                                      "d 8\n"
                                      "k 2\n"
                                      "variant vanilla   # trailing comment\n"
                                      "k 1\n"
                                      "ensemble_m 2\n");
  const TrainConfig cfg = fbrl::load_train_config(path);
  CHECK(cfg.d == 8);
  CHECK(cfg.k == 1);  // later line wins
  CHECK(cfg.variant == fbrl::Variant::kVanilla);
  std::remove(path.c_str());
}

TEST_CASE("config include splices files relative to the includer",
          "[config]") {
  const std::string base = write_temp("base.cfg",
                                      "d 8\n"
                                      "k 4\n"
                                      "hidden 32\n");
  const std::string top = write_temp("top.cfg",
                                     "include fbrl_fmt_base.cfg\n"
                                     "hidden 16\n");
  const TrainConfig cfg = fbrl::load_train_config(top);
  CHECK(cfg.d == 8);
  CHECK(cfg.k == 4);
  CHECK(cfg.hidden == 16);  // override after include
  std::remove(base.c_str());
  std::remove(top.c_str());
}

TEST_CASE("config include cycles and missing files are rejected",
          "[config]") {
  const std::string a = write_temp("cycle_a.cfg",
                                   "include fbrl_fmt_cycle_b.cfg\n");
  const std::string b = write_temp("cycle_b.cfg",
                                   "include fbrl_fmt_cycle_a.cfg\n");
  CHECK_THROWS_WITH(fbrl::load_train_config(a),
                    Catch::Matchers::ContainsSubstring("cycle"));
  std::remove(a.c_str());
  std::remove(b.c_str());

  const std::string lone = write_temp("lone.cfg",
                                      "include does_not_exist.cfg\n");
  CHECK_THROWS_AS(fbrl::load_train_config(lone), IoError);
  std::remove(lone.c_str());
}

TEST_CASE("config schema is closed and lines need values", "[config]") {
  const std::string unknown = write_temp("unknown.cfg", "dd 8\n");
  CHECK_THROWS_WITH(fbrl::load_train_config(unknown),
                    Catch::Matchers::ContainsSubstring("unknown config key"));
  std::remove(unknown.c_str());

  const std::string bare = write_temp("bare.cfg", "d\n");
  CHECK_THROWS_WITH(fbrl::load_train_config(bare),
                    Catch::Matchers::ContainsSubstring("without a value"));
  std::remove(bare.c_str());

  const std::string bad_value = write_temp("badvalue.cfg", "d eight\n");
  CHECK_THROWS_AS(fbrl::load_train_config(bad_value), ContractError);
  std::remove(bad_value.c_str());
}

TEST_CASE("canonical config echo reloads to the same configuration",
          "[config]") {
  TrainConfig cfg = small_config();
  cfg.variant = fbrl::Variant::kAw;
  cfg.k = 1;
  cfg.beta = 0.25;
  cfg.tau_mix = 0.875;

  const std::string path = "/tmp/fbrl_fmt_echo.cfg";
  fbrl::save_train_config(cfg, path);
  const TrainConfig back = fbrl::load_train_config(path);
  CHECK(fbrl::train_config_to_map(back) == fbrl::train_config_to_map(cfg));
  CHECK(fbrl::train_config_hash(back) == fbrl::train_config_hash(cfg));
  std::remove(path.c_str());

  TrainConfig other = cfg;
  other.lr = cfg.lr * 2.0;
  CHECK(fbrl::train_config_hash(other) != fbrl::train_config_hash(cfg));
}

TEST_CASE("config magic line is optional and skipped", "[config]") {
  const std::string path = write_temp("magic.cfg",
                                      "fbrl-config v1\n"
                                      "d 8\n"
                                      "k 1\n");
  const TrainConfig cfg = fbrl::load_train_config(path);
  CHECK(cfg.d == 8);
  CHECK(cfg.k == 1);
  std::remove(path.c_str());
}
