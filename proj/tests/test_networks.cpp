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
#include <cmath>
#include <vector>

#include "fbrl/networks.hpp"

using fbrl::Array2;
using fbrl::Rng;
using fbrl::TaskVector;

namespace {

TaskVector tv(std::vector<double> z, std::vector<int> blocks) {
  TaskVector t;
  t.z = std::move(z);
  t.block_sizes = std::move(blocks);
  return t;
}

// Draws a random normalized task matrix (rows x d) for batch forwards.
Array2 random_z_rows(int rows, int d, Rng& rng) {
  Array2 out(rows, d);
  for (int r = 0; r < rows; ++r) {
    double norm = 0.0;
    for (int c = 0; c < d; ++c) {
      out.at(r, c) = rng.normal();
      norm += out.at(r, c) * out.at(r, c);
    }
    norm = std::sqrt(norm);
    for (int c = 0; c < d; ++c) {
      out.at(r, c) *= std::sqrt(static_cast<double>(d)) / norm;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("normalize_z arithmetic, idempotence, scale invariance", "[networks]") {
  TaskVector a = fbrl::normalize_z(tv({1, 0, 0, 0}, {4}));
  CHECK(a.z[0] == 2.0);
  CHECK(a.z[1] == 0.0);

  TaskVector again = fbrl::normalize_z(a);
  for (int i = 0; i < 4; ++i) {
    CHECK(again.z[static_cast<std::size_t>(i)] ==
          Catch::Approx(a.z[static_cast<std::size_t>(i)]).margin(1e-12));
  }

  TaskVector b = fbrl::normalize_z(tv({0.3, -1.2, 0.5, 2.0}, {2, 2}));
  TaskVector b_scaled = fbrl::normalize_z(tv({0.9, -3.6, 1.5, 6.0}, {2, 2}));
  for (int i = 0; i < 4; ++i) {
    CHECK(b.z[static_cast<std::size_t>(i)] ==
          Catch::Approx(b_scaled.z[static_cast<std::size_t>(i)]).margin(1e-12));
  }
  double norm = 0.0;
  for (double v : b.z) norm += v * v;
  CHECK(std::sqrt(norm) == Catch::Approx(2.0).margin(1e-9));

  CHECK_THROWS_AS(fbrl::normalize_z(tv({0, 0}, {2})), fbrl::ContractError);
  CHECK_THROWS_AS(fbrl::normalize_z(tv({1, 1}, {3})), fbrl::ContractError);
}

TEST_CASE("residual normalization: single block equals normalize_z", "[networks]") {
  TaskVector z = tv({0.5, -2.0, 1.0}, {3});
  TaskVector a = fbrl::residual_ar_normalize(z);
  TaskVector b = fbrl::normalize_z(z);
  for (int i = 0; i < 3; ++i) {
    CHECK(a.z[static_cast<std::size_t>(i)] ==
          Catch::Approx(b.z[static_cast<std::size_t>(i)]).margin(1e-12));
  }
}

TEST_CASE("residual normalization: hand-computed two-block case", "[networks]") {
  // z = (1,0 | 1,0), d1 = d2 = 2.
  // Block 1: ||z_{1:1}|| = 1, factor sqrt(2) -> (sqrt2, 0).
  // Block 2: ||z_{1:2}|| = sqrt(2), factor sqrt(4)/sqrt(2) = sqrt(2)
  //          -> (sqrt2, 0).
  TaskVector out = fbrl::residual_ar_normalize(tv({1, 0, 1, 0}, {2, 2}));
  const double s2 = std::sqrt(2.0);
  CHECK(out.z[0] == Catch::Approx(s2).margin(1e-12));
  CHECK(out.z[1] == 0.0);
  CHECK(out.z[2] == Catch::Approx(s2).margin(1e-12));
  CHECK(out.z[3] == 0.0);
}

TEST_CASE("residual normalization is positively scale invariant", "[networks]") {
  Rng rng(4);
  std::vector<double> z(8);
  for (double& v : z) v = rng.normal();
  TaskVector base = fbrl::residual_ar_normalize(tv(z, {2, 2, 4}));
  for (double alpha : {0.001, 0.7, 13.0, 5000.0}) {
    std::vector<double> scaled = z;
    for (double& v : scaled) v *= alpha;
    TaskVector out = fbrl::residual_ar_normalize(tv(scaled, {2, 2, 4}));
    for (int i = 0; i < 8; ++i) {
      CHECK(out.z[static_cast<std::size_t>(i)] ==
            Catch::Approx(base.z[static_cast<std::size_t>(i)]).margin(1e-12));
    }
  }
  CHECK_THROWS_AS(fbrl::residual_ar_normalize(tv({0, 0, 1, 1}, {2, 2})),
                  fbrl::ContractError);
}

TEST_CASE("residual normalization is prefix-causal", "[networks]") {
  Rng rng(9);
  std::vector<double> z(8);
  for (double& v : z) v = rng.normal();
  TaskVector base = fbrl::residual_ar_normalize(tv(z, {2, 2, 2, 2}));
  // Changing block 3 (dims 4,5) must leave output blocks 1..2 bit-identical.
  std::vector<double> mod = z;
  mod[4] += 3.0;
  mod[5] -= 1.0;
  TaskVector out = fbrl::residual_ar_normalize(tv(mod, {2, 2, 2, 2}));
  for (int i = 0; i < 4; ++i) {
    CHECK(out.z[static_cast<std::size_t>(i)] ==
          base.z[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("build_backward rejects impossible partitions", "[networks]") {
  Rng rng(1);
  CHECK_THROWS_AS(fbrl::build_backward(4, 8, 32, 2, rng),
                  fbrl::ContractError);  // K > d
  CHECK_THROWS_AS(fbrl::build_backward(6, 4, 32, 2, rng),
                  fbrl::ContractError);  // K does not divide d
  CHECK_THROWS_AS(fbrl::build_backward(8, 4, 2, 2, rng),
                  fbrl::ContractError);  // hidden < K
}

TEST_CASE("backward net: exact autoregressive masking", "[networks]") {
  Rng rng(17);
  const int d = 16;
  const int k = 4;
  auto net = fbrl::build_backward(d, k, 32, 3, rng);
  Array2 s_enc = Array2::uniform(5, 3, 0.0, 1.0, rng);

  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> raw(d);
    for (double& v : raw) v = rng.normal();
    TaskVector z = tv(raw, fbrl::make_blocks(d, k));
    Array2 base = net.forward_value(
        s_enc, Array2::tile_rows(fbrl::residual_ar_normalize(z).z, 5));

    for (int block = 1; block <= k; ++block) {
      std::vector<double> mod = raw;
      const int lo = (block - 1) * (d / k);
      for (int c = 0; c < d / k; ++c) {
        mod[static_cast<std::size_t>(lo + c)] += rng.normal() + 0.5;
      }
      Array2 out = net.forward_value(
          s_enc, Array2::tile_rows(fbrl::residual_ar_normalize(tv(mod, z.block_sizes)).z, 5));
      // Output blocks 1..block are bit-identical (they cannot see z blocks
      // >= block); later blocks are free to move.
      for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < (d / k) * block; ++c) {
          CHECK(out.at(r, c) == base.at(r, c));
        }
      }
      if (block < k) {
        bool later_changed = false;
        for (int r = 0; r < 5; ++r) {
          for (int c = (d / k) * block; c < d; ++c) {
            if (out.at(r, c) != base.at(r, c)) later_changed = true;
          }
        }
        CHECK(later_changed);
      }
    }
  }
}

TEST_CASE("backward net: K=1 output ignores z entirely", "[networks]") {
  Rng rng(23);
  auto net = fbrl::build_backward(8, 1, 32, 2, rng);
  Array2 s_enc = Array2::uniform(4, 2, 0.0, 1.0, rng);
  Array2 z1 = random_z_rows(4, 8, rng);
  Array2 z2 = random_z_rows(4, 8, rng);
  Array2 out1 = net.forward_value(s_enc, z1);
  Array2 out2 = net.forward_value(s_enc, z2);
  for (std::size_t i = 0; i < out1.size(); ++i) {
    CHECK(out1.data[i] == out2.data[i]);
  }
}

TEST_CASE("backward net: per-block output norms are sqrt(d_k)", "[networks]") {
  Rng rng(31);
  auto net = fbrl::build_backward_blocks({2, 3, 5}, 32, 2, rng);
  Array2 s_enc = Array2::uniform(6, 2, 0.0, 1.0, rng);
  std::vector<double> raw(10);
  for (double& v : raw) v = rng.normal();
  TaskVector z = fbrl::residual_ar_normalize(tv(raw, {2, 3, 5}));
  Array2 out = net.forward_value(s_enc, Array2::tile_rows(z.z, 6));
  const std::vector<int> blocks = {2, 3, 5};
  for (int r = 0; r < 6; ++r) {
    int c0 = 0;
    for (int b : blocks) {
      double norm = 0.0;
      for (int c = c0; c < c0 + b; ++c) norm += out.at(r, c) * out.at(r, c);
      CHECK(std::sqrt(norm) ==
            Catch::Approx(std::sqrt(static_cast<double>(b))).margin(1e-9));
      c0 += b;
    }
  }
}

TEST_CASE("forward ensemble: independent members, equal targets", "[networks]") {
  Rng rng(7);
  auto ens = fbrl::build_forward_ensemble(3, 8, 32, 2, 4, rng);
  REQUIRE(ens.size() == 3);
  // Members differ from each other.
  bool differ = false;
  for (std::size_t i = 0; i < ens.members[0].out_w.value.size(); ++i) {
    if (ens.members[0].out_w.value.data[i] !=
        ens.members[1].out_w.value.data[i]) {
      differ = true;
    }
  }
  CHECK(differ);
  // Targets start as exact copies.
  for (int m = 0; m < 3; ++m) {
    auto mp = ens.members[static_cast<std::size_t>(m)].params();
    auto tp = ens.targets[static_cast<std::size_t>(m)].params();
    for (std::size_t p = 0; p < mp.size(); ++p) {
      for (std::size_t i = 0; i < mp[p]->value.size(); ++i) {
        CHECK(mp[p]->value.data[i] == tp[p]->value.data[i]);
      }
    }
  }
  // Forward output is finite and shaped rows x d.
  Array2 s_enc = Array2::uniform(5, 2, 0.0, 1.0, rng);
  Array2 a_onehot = fbrl::one_hot_rows({0, 1, 2, 3, 0}, 4);
  Array2 z = random_z_rows(5, 8, rng);
  Array2 f = ens.members[0].forward_value(s_enc, a_onehot, z);
  CHECK(f.rows == 5);
  CHECK(f.cols == 8);
  CHECK(f.finite());
}

TEST_CASE("policy: probabilities normalize and scale-invariance in z", "[networks]") {
  Rng rng(13);
  auto pi = fbrl::build_policy(8, 32, 2, 4, rng);
  Array2 s_enc = Array2::uniform(6, 2, 0.0, 1.0, rng);

  std::vector<double> raw(8);
  for (double& v : raw) v = rng.normal();
  TaskVector z = tv(raw, {8});
  std::vector<double> scaled = raw;
  for (double& v : scaled) v *= 37.5;

  Array2 p1 = pi.distribution(s_enc, Array2::tile_rows(fbrl::normalize_z(z).z, 6));
  Array2 p2 = pi.distribution(
      s_enc, Array2::tile_rows(fbrl::normalize_z(tv(scaled, {8})).z, 6));
  for (int r = 0; r < 6; ++r) {
    double total = 0.0;
    for (int a = 0; a < 4; ++a) {
      CHECK(p1.at(r, a) > 0.0);
      total += p1.at(r, a);
      // Normalization absorbs the scale up to rounding in ||alpha z||.
      CHECK(p1.at(r, a) == Catch::Approx(p2.at(r, a)).margin(1e-12));
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("policy: zero parameters give the uniform distribution", "[networks]") {
  Rng rng(3);
  auto pi = fbrl::build_policy(4, 16, 2, 5, rng);
  for (fbrl::Parameter* p : pi.params()) p->value.fill(0.0);
  Array2 s_enc = Array2::uniform(3, 2, 0.0, 1.0, rng);
  Array2 z = random_z_rows(3, 4, rng);
  Array2 probs = pi.distribution(s_enc, z);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    CHECK(probs.data[i] == Catch::Approx(0.2).margin(1e-15));
  }
}

TEST_CASE("builders are deterministic given the rng seed", "[networks]") {
  Rng r1(99), r2(99);
  auto a = fbrl::build_backward(8, 4, 32, 3, r1);
  auto b = fbrl::build_backward(8, 4, 32, 3, r2);
  auto pa = a.params();
  auto pb = b.params();
  for (std::size_t p = 0; p < pa.size(); ++p) {
    for (std::size_t i = 0; i < pa[p]->value.size(); ++i) {
      CHECK(pa[p]->value.data[i] == pb[p]->value.data[i]);
    }
  }
}

TEST_CASE("polyak_update_net blends every parameter", "[networks]") {
  Rng rng(5);
  auto online = fbrl::build_policy(4, 8, 2, 3, rng);
  auto target = online;
  // Shift online away from target, then blend with zeta = 0.5.
  for (fbrl::Parameter* p : online.params()) {
    for (double& v : p->value.data) v += 1.0;
  }
  fbrl::polyak_update_net(target, online, 0.5);
  auto tp = target.params();
  auto op = online.params();
  for (std::size_t p = 0; p < tp.size(); ++p) {
    for (std::size_t i = 0; i < tp[p]->value.size(); ++i) {
      CHECK(tp[p]->value.data[i] ==
            Catch::Approx(op[p]->value.data[i] - 0.5).margin(1e-12));
    }
  }
}

TEST_CASE("state encodings: coords, onehot, both", "[networks]") {
  fbrl::GridSpec spec;
  spec.width = 3;
  spec.height = 2;
  auto gw = fbrl::build_gridworld(spec);

  Array2 coords =
      fbrl::state_encoding_matrix(gw.mdp, fbrl::StateEncoding::kCoords);
  CHECK(coords.rows == 6);
  CHECK(coords.cols == 2);

  Array2 onehot =
      fbrl::state_encoding_matrix(gw.mdp, fbrl::StateEncoding::kOneHot);
  CHECK(onehot.cols == 6);
  for (int s = 0; s < 6; ++s) CHECK(onehot.at(s, s) == 1.0);

  Array2 both = fbrl::state_encoding_matrix(gw.mdp, fbrl::StateEncoding::kBoth);
  CHECK(both.cols == 8);
  CHECK(both.at(2, 0) == coords.at(2, 0));
  CHECK(both.at(2, 2 + 2) == 1.0);

  CHECK(fbrl::parse_state_encoding("coords") == fbrl::StateEncoding::kCoords);
  CHECK(fbrl::state_encoding_name(fbrl::StateEncoding::kBoth) == "both");
  CHECK_THROWS_AS(fbrl::parse_state_encoding("fourier"), fbrl::ContractError);

  CHECK_THROWS_AS(fbrl::one_hot_rows({5}, 4), fbrl::ContractError);
}
