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

#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "fbrl/policy_opt.hpp"

using fbrl::AdvantageBatch;
using fbrl::Array2;
using fbrl::ContractError;
using fbrl::EnsembleQTables;
using fbrl::ForwardEnsemble;
using fbrl::Parameter;
using fbrl::PolicyNet;
using fbrl::Rng;
using fbrl::Tape;
using fbrl::Var;

namespace {

constexpr int kStateDim = 3;
constexpr int kActions = 4;
constexpr int kD = 6;

Array2 random_states(int rows, Rng& rng) {
  return Array2::uniform(rows, kStateDim, -1.0, 1.0, rng);
}

Array2 random_z_rows(int rows, Rng& rng) {
  Array2 out(rows, kD);
  for (int r = 0; r < rows; ++r) {
    double norm = 0.0;
    for (int c = 0; c < kD; ++c) {
      out.at(r, c) = rng.normal();
      norm += out.at(r, c) * out.at(r, c);
    }
    norm = std::sqrt(norm);
    for (int c = 0; c < kD; ++c) {
      out.at(r, c) *= std::sqrt(static_cast<double>(kD)) / norm;
    }
  }
  return out;
}

ForwardEnsemble make_ensemble(int members, Rng& rng) {
  return fbrl::build_forward_ensemble(members, kD, 8, kStateDim, kActions,
                                      rng);
}

PolicyNet make_policy(Rng& rng) {
  return fbrl::build_policy(kD, 8, kStateDim, kActions, rng);
}

// Policy with all-zero parameters: exactly uniform over actions.
PolicyNet make_uniform_policy() {
  Rng rng(1);
  PolicyNet pi = fbrl::build_policy(kD, 8, kStateDim, kActions, rng);
  for (Parameter* p : pi.params()) p->value.fill(0.0);
  return pi;
}

// Central finite difference of a scalar-valued rebuild function with respect
// to one parameter entry.
template <typename MakeLoss>
double fd_param(Parameter& p, std::size_t idx, MakeLoss make_loss,
                double eps) {
  const double keep = p.value.data[idx];
  p.value.data[idx] = keep + eps;
  const double hi = make_loss();
  p.value.data[idx] = keep - eps;
  const double lo = make_loss();
  p.value.data[idx] = keep;
  return (hi - lo) / (2.0 * eps);
}

}  // namespace

// ---------------------------------------------------------------------------
// Q tables
// ---------------------------------------------------------------------------

TEST_CASE("member q table equals a direct per-action forward pass") {
  Rng rng(11);
  ForwardEnsemble ens = make_ensemble(2, rng);
  const Array2 s = random_states(5, rng);
  const Array2 z = random_z_rows(5, rng);

  const Array2 q = fbrl::member_q_table(ens.members[0], s, z);
  REQUIRE(q.rows == 5);
  REQUIRE(q.cols == kActions);
  for (int a = 0; a < kActions; ++a) {
    std::vector<int> act(5, a);
    const Array2 f = ens.members[0].forward_value(
        s, fbrl::one_hot_rows(act, kActions), z);
    for (int r = 0; r < 5; ++r) {
      double dot = 0.0;
      for (int c = 0; c < kD; ++c) dot += f.at(r, c) * z.at(r, c);
      REQUIRE(q.at(r, a) == dot);
    }
  }
}

TEST_CASE("ensemble q tables aggregate mean, min and sum per entry") {
  Rng rng(12);
  ForwardEnsemble ens = make_ensemble(3, rng);
  const Array2 s = random_states(4, rng);
  const Array2 z = random_z_rows(4, rng);

  const EnsembleQTables q = fbrl::ensemble_q_tables(ens, s, z);
  const Array2 q0 = fbrl::member_q_table(ens.members[0], s, z);
  const Array2 q1 = fbrl::member_q_table(ens.members[1], s, z);
  const Array2 q2 = fbrl::member_q_table(ens.members[2], s, z);
  for (std::size_t i = 0; i < q.mean.size(); ++i) {
    const double total = q0.data[i] + q1.data[i] + q2.data[i];
    REQUIRE(q.sum.data[i] == total);
    REQUIRE(q.mean.data[i] == Catch::Approx(total / 3.0).margin(1e-15));
    REQUIRE(q.min.data[i] ==
            std::min({q0.data[i], q1.data[i], q2.data[i]}));
  }
}

// ---------------------------------------------------------------------------
// Advantages
// ---------------------------------------------------------------------------

TEST_CASE("advantages equal value minus policy-weighted min-ensemble value") {
  Rng rng(13);
  ForwardEnsemble ens = make_ensemble(2, rng);
  PolicyNet pi = make_policy(rng);
  const Array2 s = random_states(6, rng);
  const Array2 z = random_z_rows(6, rng);
  const std::vector<int> actions = {0, 3, 1, 2, 2, 0};

  const EnsembleQTables q = fbrl::ensemble_q_tables(ens, s, z);
  const Array2 probs = pi.distribution(s, z);

  const std::vector<double> adv =
      fbrl::advantages(ens, pi, s, actions, z, /*literal_sum=*/false);
  const std::vector<double> adv_sum =
      fbrl::advantages(ens, pi, s, actions, z, /*literal_sum=*/true);
  REQUIRE(adv.size() == 6);
  for (int r = 0; r < 6; ++r) {
    double baseline = 0.0;
    for (int a = 0; a < kActions; ++a) {
      baseline += probs.at(r, a) * q.min.at(r, a);
    }
    const int a = actions[static_cast<std::size_t>(r)];
    REQUIRE(adv[static_cast<std::size_t>(r)] ==
            Catch::Approx(q.mean.at(r, a) - baseline).margin(1e-12));
    REQUIRE(adv_sum[static_cast<std::size_t>(r)] ==
            Catch::Approx(q.sum.at(r, a) - baseline).margin(1e-12));
  }
}

TEST_CASE("advantages under a uniform policy and a single member") {
  // With one member, mean = min = the member table, so for a uniform policy
  // A(s,a) = Q(s,a) - mean_a' Q(s,a').
  Rng rng(14);
  ForwardEnsemble ens = make_ensemble(1, rng);
  PolicyNet pi = make_uniform_policy();
  const Array2 s = random_states(3, rng);
  const Array2 z = random_z_rows(3, rng);
  const std::vector<int> actions = {1, 0, 3};

  const Array2 q = fbrl::member_q_table(ens.members[0], s, z);
  const std::vector<double> adv = fbrl::advantages(ens, pi, s, actions, z);
  for (int r = 0; r < 3; ++r) {
    double mean_q = 0.0;
    for (int a = 0; a < kActions; ++a) mean_q += q.at(r, a);
    mean_q /= kActions;
    const int a = actions[static_cast<std::size_t>(r)];
    REQUIRE(adv[static_cast<std::size_t>(r)] ==
            Catch::Approx(q.at(r, a) - mean_q).margin(1e-12));
  }
}

TEST_CASE("advantages validate batch shapes and action range") {
  Rng rng(15);
  ForwardEnsemble ens = make_ensemble(2, rng);
  PolicyNet pi = make_policy(rng);
  const Array2 s = random_states(3, rng);
  const Array2 z = random_z_rows(3, rng);
  REQUIRE_THROWS_AS(fbrl::advantages(ens, pi, s, {0, 1}, z),
                    fbrl::DimensionError);
  REQUIRE_THROWS_AS(fbrl::advantages(ens, pi, s, {0, 1, kActions}, z),
                    ContractError);
}

// ---------------------------------------------------------------------------
// Regression weights
// ---------------------------------------------------------------------------

TEST_CASE("softmax weights: equal advantages give exactly uniform weights") {
  const std::vector<double> w =
      fbrl::wis_weights({0.37, 0.37, 0.37, 0.37}, 0.5);
  for (double v : w) REQUIRE(v == 0.25);
}

TEST_CASE("softmax weights match the two-sample closed form") {
  // A = (1, 0), beta = 1: w = (e/(1+e), 1/(1+e)).
  const std::vector<double> w = fbrl::wis_weights({1.0, 0.0}, 1.0);
  const double e = std::exp(1.0);
  REQUIRE(w[0] == Catch::Approx(e / (1.0 + e)).margin(1e-15));
  REQUIRE(w[1] == Catch::Approx(1.0 / (1.0 + e)).margin(1e-15));
  REQUIRE(w[0] + w[1] == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("softmax weights flatten to uniform as beta grows") {
  const std::vector<double> w =
      fbrl::wis_weights({3.0, -1.0, 0.5, 2.0}, 1e9);
  for (double v : w) REQUIRE(v == Catch::Approx(0.25).margin(1e-6));
}

TEST_CASE("softmax weights are shift-invariant and permutation-equivariant") {
  const std::vector<double> adv = {0.9, -0.4, 1.7, 0.0};
  const std::vector<double> w = fbrl::wis_weights(adv, 0.7);

  std::vector<double> shifted = adv;
  for (double& a : shifted) a += 123.456;
  const std::vector<double> ws = fbrl::wis_weights(shifted, 0.7);
  for (std::size_t i = 0; i < w.size(); ++i) {
    REQUIRE(ws[i] == Catch::Approx(w[i]).margin(1e-12));
  }

  const std::vector<double> perm_adv = {1.7, 0.0, 0.9, -0.4};
  const std::vector<double> wp = fbrl::wis_weights(perm_adv, 0.7);
  REQUIRE(wp[0] == Catch::Approx(w[2]).margin(1e-12));
  REQUIRE(wp[1] == Catch::Approx(w[3]).margin(1e-12));
  REQUIRE(wp[2] == Catch::Approx(w[0]).margin(1e-12));
  REQUIRE(wp[3] == Catch::Approx(w[1]).margin(1e-12));
}

TEST_CASE("softmax weights scale advantages and temperature together") {
  const std::vector<double> adv = {0.9, -0.4, 1.7, 0.0};
  std::vector<double> scaled = adv;
  for (double& a : scaled) a /= 0.3;
  const std::vector<double> w1 = fbrl::wis_weights(adv, 0.3);
  const std::vector<double> w2 = fbrl::wis_weights(scaled, 1.0);
  for (std::size_t i = 0; i < w1.size(); ++i) {
    REQUIRE(w1[i] == Catch::Approx(w2[i]).margin(1e-12));
  }
}

TEST_CASE("softmax weights reject bad temperature and empty batches") {
  REQUIRE_THROWS_AS(fbrl::wis_weights({1.0}, 0.0), ContractError);
  REQUIRE_THROWS_AS(fbrl::wis_weights({1.0}, -1.0), ContractError);
  REQUIRE_THROWS_AS(fbrl::wis_weights({}, 1.0), ContractError);
}

TEST_CASE("improved weights: uniform input stays uniform") {
  const std::vector<double> u =
      fbrl::iwis_from_wis({0.25, 0.25, 0.25, 0.25});
  for (double v : u) REQUIRE(v == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("improved weights match the two-sample closed form") {
  // w = (e/(1+e), 1/(1+e)) maps to u = (e, 1/e) before normalization, so
  // the normalized improved weights are (e^2/(e^2+1), 1/(e^2+1)).
  const double e = std::exp(1.0);
  const std::vector<double> u =
      fbrl::iwis_from_wis({e / (1.0 + e), 1.0 / (1.0 + e)});
  const double e2 = e * e;
  REQUIRE(u[0] == Catch::Approx(e2 / (e2 + 1.0)).margin(1e-12));
  REQUIRE(u[1] == Catch::Approx(1.0 / (e2 + 1.0)).margin(1e-12));
}

TEST_CASE("improved weights sharpen non-uniform softmax weights") {
  const std::vector<double> w = fbrl::wis_weights({2.0, 1.0, 0.0}, 1.0);
  const std::vector<double> u = fbrl::iwis_from_wis(w);
  const double wmax = *std::max_element(w.begin(), w.end());
  const double umax = *std::max_element(u.begin(), u.end());
  REQUIRE(umax > wmax);
  double total = 0.0;
  for (double v : u) total += v;
  REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("improved weights reject degenerate inputs") {
  REQUIRE_THROWS_AS(fbrl::iwis_from_wis({1.0}), ContractError);
  REQUIRE_THROWS_AS(fbrl::iwis_from_wis({1.0, 0.0}), ContractError);
  REQUIRE_THROWS_AS(fbrl::iwis_from_wis({1.5, -0.5}), ContractError);
}

TEST_CASE("advantage batch bundles advantages with both weightings") {
  Rng rng(16);
  ForwardEnsemble ens = make_ensemble(2, rng);
  PolicyNet pi = make_policy(rng);
  const Array2 s = random_states(5, rng);
  const Array2 z = random_z_rows(5, rng);
  const std::vector<int> actions = {0, 1, 2, 3, 0};

  const AdvantageBatch batch =
      fbrl::advantage_batch(ens, pi, s, actions, z, 0.8);
  const std::vector<double> adv = fbrl::advantages(ens, pi, s, actions, z);
  const std::vector<double> w = fbrl::wis_weights(adv, 0.8);
  const std::vector<double> u = fbrl::iwis_from_wis(w);
  for (std::size_t i = 0; i < adv.size(); ++i) {
    REQUIRE(batch.advantages[i] == adv[i]);
    REQUIRE(batch.w[i] == w[i]);
    REQUIRE(batch.w_improved[i] == u[i]);
  }
}

// ---------------------------------------------------------------------------
// Advantage-weighted actor loss
// ---------------------------------------------------------------------------

TEST_CASE("weighted log-likelihood loss on a uniform policy is log(A)") {
  PolicyNet pi = make_uniform_policy();
  Rng rng(17);
  const Array2 s = random_states(4, rng);
  const Array2 z = random_z_rows(4, rng);
  const std::vector<int> actions = {0, 1, 2, 3};
  const std::vector<double> weights = {0.25, 0.25, 0.25, 0.25};

  Tape t;
  fbrl::AwActorLoss out = fbrl::aw_actor_loss(t, pi, s, actions, z, weights);
  REQUIRE(t.val(out.loss).data[0] ==
          Catch::Approx(std::log(static_cast<double>(kActions)))
              .margin(1e-12));
  REQUIRE(out.clamped == 0);
}

TEST_CASE("weighted log-likelihood loss validates its weights") {
  Rng rng(18);
  PolicyNet pi = make_policy(rng);
  const Array2 s = random_states(2, rng);
  const Array2 z = random_z_rows(2, rng);
  Tape t;
  REQUIRE_THROWS_AS(
      fbrl::aw_actor_loss(t, pi, s, {0, 1}, z, {0.8, 0.3}), ContractError);
  REQUIRE_THROWS_AS(
      fbrl::aw_actor_loss(t, pi, s, {0, 1}, z, {1.2, -0.2}), ContractError);
  REQUIRE_THROWS_AS(
      fbrl::aw_actor_loss(t, pi, s, {0, 1}, z, {1.0}),
      fbrl::DimensionError);
}

TEST_CASE("weighted log-likelihood loss counts log-floor clamps") {
  // Zero out everything but the output bias, then push one logit 40 nats
  // above the rest: the other actions get probability ~e^-40 < 1e-12.
  PolicyNet pi = make_uniform_policy();
  pi.out_b.value.at(0, 0) = 40.0;
  Rng rng(19);
  const Array2 s = random_states(3, rng);
  const Array2 z = random_z_rows(3, rng);

  Tape t;
  fbrl::AwActorLoss out = fbrl::aw_actor_loss(
      t, pi, s, {0, 1, 2}, z, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  REQUIRE(out.clamped == 2);
  // The floored terms contribute exactly log(1e-12) each.
  const double floor_part = -2.0 / 3.0 * std::log(fbrl::kLogProbFloor);
  REQUIRE(t.val(out.loss).data[0] ==
          Catch::Approx(floor_part).margin(1e-6));
}

TEST_CASE("weighted log-likelihood gradient matches finite differences") {
  Rng rng(20);
  PolicyNet pi = make_policy(rng);
  const Array2 s = random_states(5, rng);
  const Array2 z = random_z_rows(5, rng);
  const std::vector<int> actions = {2, 0, 1, 3, 2};
  const std::vector<double> weights = {0.3, 0.1, 0.25, 0.15, 0.2};

  auto loss_value = [&] {
    Tape t;
    return t.val(fbrl::aw_actor_loss(t, pi, s, actions, z, weights).loss)
        .data[0];
  };

  Tape t;
  fbrl::AwActorLoss out = fbrl::aw_actor_loss(t, pi, s, actions, z, weights);
  fbrl::zero_grads(pi.params());
  t.backward(out.loss);

  for (Parameter* p : pi.params()) {
    const std::size_t step = std::max<std::size_t>(1, p->value.size() / 3);
    for (std::size_t i = 0; i < p->value.size(); i += step) {
      const double fd = fd_param(*p, i, loss_value, 1e-6);
      const double an = p->grad.data[i];
      const double scale = std::max({std::fabs(fd), std::fabs(an), 1e-8});
      INFO(p->name << "[" << i << "] fd=" << fd << " an=" << an);
      REQUIRE(std::fabs(fd - an) / scale < 1e-6);
    }
  }
}

// ---------------------------------------------------------------------------
// Greedy critic-following actor loss
// ---------------------------------------------------------------------------

TEST_CASE("critic-following loss equals minus mean expected min-Q") {
  Rng rng(21);
  ForwardEnsemble ens = make_ensemble(2, rng);
  PolicyNet pi = make_policy(rng);
  const Array2 s = random_states(6, rng);
  const Array2 z = random_z_rows(6, rng);

  Tape t;
  Var loss = fbrl::td3_actor_loss(t, ens, pi, s, z);
  const EnsembleQTables q = fbrl::ensemble_q_tables(ens, s, z);
  const Array2 probs = pi.distribution(s, z);
  double expected = 0.0;
  for (int r = 0; r < 6; ++r) {
    for (int a = 0; a < kActions; ++a) {
      expected += probs.at(r, a) * q.min.at(r, a);
    }
  }
  expected /= 6.0;
  REQUIRE(t.val(loss).data[0] == Catch::Approx(-expected).margin(1e-12));
}

TEST_CASE("critic-following gradient matches finite differences") {
  Rng rng(22);
  ForwardEnsemble ens = make_ensemble(2, rng);
  PolicyNet pi = make_policy(rng);
  const Array2 s = random_states(4, rng);
  const Array2 z = random_z_rows(4, rng);

  auto loss_value = [&] {
    Tape t;
    return t.val(fbrl::td3_actor_loss(t, ens, pi, s, z)).data[0];
  };

  Tape t;
  Var loss = fbrl::td3_actor_loss(t, ens, pi, s, z);
  fbrl::zero_grads(pi.params());
  t.backward(loss);

  for (Parameter* p : pi.params()) {
    const std::size_t step = std::max<std::size_t>(1, p->value.size() / 3);
    for (std::size_t i = 0; i < p->value.size(); i += step) {
      const double fd = fd_param(*p, i, loss_value, 1e-6);
      const double an = p->grad.data[i];
      const double scale = std::max({std::fabs(fd), std::fabs(an), 1e-8});
      INFO(p->name << "[" << i << "] fd=" << fd << " an=" << an);
      REQUIRE(std::fabs(fd - an) / scale < 1e-6);
    }
  }
}

TEST_CASE("critic-following updates increase the expected critic value") {
  Rng rng(23);
  ForwardEnsemble ens = make_ensemble(2, rng);
  PolicyNet pi = make_policy(rng);
  const Array2 s = random_states(8, rng);
  const Array2 z = random_z_rows(8, rng);

  auto loss_value = [&] {
    Tape t;
    return t.val(fbrl::td3_actor_loss(t, ens, pi, s, z)).data[0];
  };
  const double before = loss_value();
  for (int it = 0; it < 50; ++it) {
    Tape t;
    Var loss = fbrl::td3_actor_loss(t, ens, pi, s, z);
    fbrl::zero_grads(pi.params());
    t.backward(loss);
    fbrl::adam_step(pi.params(), 1e-2);
  }
  REQUIRE(loss_value() < before);
}

// ---------------------------------------------------------------------------
// Evaluation-time action selection
// ---------------------------------------------------------------------------

namespace {

std::vector<double> z_vec(const Array2& z_rows, int row) {
  std::vector<double> z(static_cast<std::size_t>(z_rows.cols));
  for (int c = 0; c < z_rows.cols; ++c) {
    z[static_cast<std::size_t>(c)] = z_rows.at(row, c);
  }
  return z;
}

}  // namespace

TEST_CASE("single-sample selection is exactly a policy draw") {
  Rng rng(24);
  ForwardEnsemble ens = make_ensemble(2, rng);
  PolicyNet pi = make_policy(rng);
  const Array2 s = random_states(1, rng);
  const Array2 z = random_z_rows(1, rng);

  Rng pick(99);
  Rng clone(99);
  const int chosen =
      fbrl::evaluation_sampling_act(pi, ens, s, z_vec(z, 0), 1, pick);

  const Array2 probs = pi.distribution(s, z);
  std::vector<double> p(static_cast<std::size_t>(kActions));
  for (int a = 0; a < kActions; ++a) p[static_cast<std::size_t>(a)] = probs.at(0, a);
  REQUIRE(chosen == clone.categorical(p));
}

TEST_CASE("many-sample selection finds the argmax of the mean critic") {
  // A uniform policy misses an action in 256 draws with probability
  // (3/4)^256, so the selection equals the global argmax for this seed.
  Rng rng(25);
  ForwardEnsemble ens = make_ensemble(2, rng);
  PolicyNet pi = make_uniform_policy();
  const Array2 s = random_states(1, rng);
  const Array2 z = random_z_rows(1, rng);

  Rng pick(7);
  const int chosen =
      fbrl::evaluation_sampling_act(pi, ens, s, z_vec(z, 0), 256, pick);

  const EnsembleQTables q = fbrl::ensemble_q_tables(ens, s, z);
  int best = 0;
  for (int a = 1; a < kActions; ++a) {
    if (q.mean.at(0, a) > q.mean.at(0, best)) best = a;
  }
  REQUIRE(chosen == best);
}

TEST_CASE("selection is deterministic for a fixed rng seed") {
  Rng rng(26);
  ForwardEnsemble ens = make_ensemble(2, rng);
  PolicyNet pi = make_policy(rng);
  const Array2 s = random_states(1, rng);
  const Array2 z = random_z_rows(1, rng);

  Rng a(1234);
  Rng b(1234);
  for (int i = 0; i < 20; ++i) {
    REQUIRE(fbrl::evaluation_sampling_act(pi, ens, s, z_vec(z, 0), 8, a) ==
            fbrl::evaluation_sampling_act(pi, ens, s, z_vec(z, 0), 8, b));
  }
}

TEST_CASE("more action samples never hurt the mean critic value") {
  // Paired comparison: with the same policy and critic, the best of 16
  // draws is at least as good as a single draw, and strictly better on
  // average over many states.
  Rng rng(27);
  ForwardEnsemble ens = make_ensemble(2, rng);
  PolicyNet pi = make_policy(rng);

  double total_one = 0.0;
  double total_many = 0.0;
  Rng pick(5150);
  for (int trial = 0; trial < 300; ++trial) {
    const Array2 s = random_states(1, rng);
    const Array2 z = random_z_rows(1, rng);
    const EnsembleQTables q = fbrl::ensemble_q_tables(ens, s, z);
    const int a1 =
        fbrl::evaluation_sampling_act(pi, ens, s, z_vec(z, 0), 1, pick);
    const int a16 =
        fbrl::evaluation_sampling_act(pi, ens, s, z_vec(z, 0), 16, pick);
    total_one += q.mean.at(0, a1);
    total_many += q.mean.at(0, a16);
  }
  REQUIRE(total_many > total_one);
}

TEST_CASE("evaluation-time selection validates its inputs") {
  Rng rng(28);
  ForwardEnsemble ens = make_ensemble(2, rng);
  PolicyNet pi = make_policy(rng);
  const Array2 s1 = random_states(1, rng);
  const Array2 s2 = random_states(2, rng);
  const Array2 z = random_z_rows(1, rng);
  Rng pick(3);
  REQUIRE_THROWS_AS(
      fbrl::evaluation_sampling_act(pi, ens, s1, z_vec(z, 0), 0, pick),
      ContractError);
  REQUIRE_THROWS_AS(
      fbrl::evaluation_sampling_act(pi, ens, s2, z_vec(z, 0), 4, pick),
      fbrl::DimensionError);
}
