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

#include "fbrl/linalg.hpp"
#include "fbrl/rng.hpp"

using fbrl::Array2;
using fbrl::Rng;

TEST_CASE("solve recovers a hand-worked inverse", "[linalg]") {
  // A = [[4,7],[2,6]], A^-1 = [[0.6,-0.7],[-0.2,0.4]].
  Array2 a = Array2::from({{4, 7}, {2, 6}});
  Array2 inv = fbrl::inverse(a);
  CHECK(inv.at(0, 0) == Catch::Approx(0.6).margin(1e-12));
  CHECK(inv.at(0, 1) == Catch::Approx(-0.7).margin(1e-12));
  CHECK(inv.at(1, 0) == Catch::Approx(-0.2).margin(1e-12));
  CHECK(inv.at(1, 1) == Catch::Approx(0.4).margin(1e-12));
}

TEST_CASE("solve residual on random diagonally dominant systems", "[linalg]") {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    int n = 6 + trial;
    Array2 a = Array2::normal(n, n, 1.0, rng);
    for (int i = 0; i < n; ++i) a.at(i, i) += n;  // ensure well-conditioned
    Array2 b = Array2::normal(n, 3, 1.0, rng);
    Array2 x = fbrl::solve(a, b);
    Array2 r = fbrl::matmul_value(a, x);
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(std::fabs(r.data[i] - b.data[i]) < 1e-12);
    }
  }
}

TEST_CASE("solve rejects singular matrices", "[linalg]") {
  Array2 a = Array2::from({{1, 2}, {2, 4}});
  Array2 b = Array2::from({{1}, {1}});
  CHECK_THROWS_AS(fbrl::solve(a, b), fbrl::NumericError);
}

TEST_CASE("svd reconstructs and has orthonormal factors", "[linalg]") {
  Rng rng(33);
  for (auto [rows, cols] : {std::pair{5, 5}, {7, 4}, {4, 7}}) {
    Array2 a = Array2::normal(rows, cols, 1.0, rng);
    auto svd = fbrl::svd(a);
    int k = std::min(rows, cols);
    REQUIRE(static_cast<int>(svd.s.size()) == k);

    // Singular values descending and non-negative.
    for (int i = 0; i + 1 < k; ++i) {
      CHECK(svd.s[i] >= svd.s[i + 1]);
      CHECK(svd.s[i] >= 0.0);
    }
    // Reconstruction U diag(s) V^T == A.
    Array2 us(rows, k);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < k; ++j) us.at(i, j) = svd.u.at(i, j) * svd.s[j];
    }
    Array2 recon = fbrl::matmul_value(us, fbrl::transpose_value(svd.v));
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::fabs(recon.data[i] - a.data[i]) < 1e-10);
    }
    // U^T U == I and V^T V == I.
    Array2 utu = fbrl::matmul_value(fbrl::transpose_value(svd.u), svd.u);
    Array2 vtv = fbrl::matmul_value(fbrl::transpose_value(svd.v), svd.v);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        double expect = i == j ? 1.0 : 0.0;
        CHECK(std::fabs(utu.at(i, j) - expect) < 1e-10);
        CHECK(std::fabs(vtv.at(i, j) - expect) < 1e-10);
      }
    }
  }
}

TEST_CASE("svd recovers known singular values", "[linalg]") {
  // diag(3, 2, 1) padded with an extra zero row.
  Array2 a(4, 3, 0.0);
  a.at(0, 0) = 3.0;
  a.at(1, 1) = 2.0;
  a.at(2, 2) = 1.0;
  auto svd = fbrl::svd(a);
  REQUIRE(svd.s.size() == 3);
  CHECK(svd.s[0] == Catch::Approx(3.0).margin(1e-12));
  CHECK(svd.s[1] == Catch::Approx(2.0).margin(1e-12));
  CHECK(svd.s[2] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("rank truncation error matches tail norm", "[linalg]") {
  std::vector<double> s{4.0, 3.0, 2.0, 1.0};
  CHECK(fbrl::rank_truncation_error(s, 2) ==
        Catch::Approx(std::sqrt(4.0 + 1.0)).margin(1e-15));
  CHECK(fbrl::rank_truncation_error(s, 4) == 0.0);
  CHECK(fbrl::rank_truncation_error(s, 0) ==
        Catch::Approx(std::sqrt(16.0 + 9.0 + 4.0 + 1.0)).margin(1e-15));
}

TEST_CASE("svd of a rank-1 matrix exposes the rank", "[linalg]") {
  // outer(u, v) with |u||v| = sigma.
  Array2 a(3, 3);
  double u[3] = {1, 2, 2};  // norm 3
  double v[3] = {2, 1, 2};  // norm 3
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a.at(i, j) = u[i] * v[j];
  }
  auto svd = fbrl::svd(a);
  CHECK(svd.s[0] == Catch::Approx(9.0).margin(1e-10));
  CHECK(svd.s[1] < 1e-10);
  CHECK(svd.s[2] < 1e-10);
}
