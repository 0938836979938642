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

#ifndef FBRL_LINALG_HPP_
#define FBRL_LINALG_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fbrl/array.hpp"
#include "fbrl/common.hpp"

namespace fbrl {

// Solves A X = B for X by Gaussian elimination with partial pivoting.
// A is n x n, B is n x m. Small dense systems only.
inline Array2 solve(Array2 a, Array2 b) {
  if (a.rows != a.cols) {
    throw DimensionError("solve: A must be square, got " + a.shape_str());
  }
  if (b.rows != a.rows) {
    throw DimensionError("solve: B rows must match A, " + a.shape_str() +
                         " vs " + b.shape_str());
  }
  const int n = a.rows;
  const int m = b.cols;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i) {
      if (std::fabs(a.at(i, k)) > std::fabs(a.at(piv, k))) piv = i;
    }
    if (std::fabs(a.at(piv, k)) < 1e-300) {
      throw NumericError("solve: singular matrix (pivot ~ 0 at column " +
                         std::to_string(k) + ")");
    }
    if (piv != k) {
      for (int j = k; j < n; ++j) std::swap(a.at(k, j), a.at(piv, j));
      for (int j = 0; j < m; ++j) std::swap(b.at(k, j), b.at(piv, j));
    }
    const double akk = a.at(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double f = a.at(i, k) / akk;
      if (f == 0.0) continue;
      for (int j = k; j < n; ++j) a.at(i, j) -= f * a.at(k, j);
      for (int j = 0; j < m; ++j) b.at(i, j) -= f * b.at(k, j);
    }
  }
  Array2 x(n, m);
  for (int i = n - 1; i >= 0; --i) {
    for (int j = 0; j < m; ++j) {
      double s = b.at(i, j);
      for (int k = i + 1; k < n; ++k) s -= a.at(i, k) * x.at(k, j);
      x.at(i, j) = s / a.at(i, i);
    }
  }
  return x;
}

inline Array2 inverse(const Array2& a) {
  return solve(a, Array2::identity(a.rows));
}

struct SvdResult {
  Array2 u;                 // m x r, orthonormal columns
  std::vector<double> s;    // r singular values, descending
  Array2 v;                 // n x r, orthonormal columns
};

// Thin SVD of an m x n matrix via one-sided Jacobi (orthogonalizes column
// pairs of a working copy until convergence). Robust and plenty fast for the
// small tabular matrices the oracles produce.
inline SvdResult svd(const Array2& input) {
  const bool transposed = input.rows < input.cols;
  Array2 a = transposed ? transpose_value(input) : input;
  const int m = a.rows;
  const int n = a.cols;
  Array2 v = Array2::identity(n);

  const double eps = 1e-15;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < m; ++i) {
          app += a.at(i, p) * a.at(i, p);
          aqq += a.at(i, q) * a.at(i, q);
          apq += a.at(i, p) * a.at(i, q);
        }
        if (std::fabs(apq) <= eps * std::sqrt(app * aqq) || apq == 0.0) {
          continue;
        }
        rotated = true;
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < m; ++i) {
          const double ap = a.at(i, p);
          const double aq = a.at(i, q);
          a.at(i, p) = c * ap - s * aq;
          a.at(i, q) = s * ap + c * aq;
        }
        for (int i = 0; i < n; ++i) {
          const double vp = v.at(i, p);
          const double vq = v.at(i, q);
          v.at(i, p) = c * vp - s * vq;
          v.at(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  // Column norms are the singular values; normalize columns into U.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> norms(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    double s2 = 0.0;
    for (int i = 0; i < m; ++i) s2 += a.at(i, j) * a.at(i, j);
    norms[static_cast<std::size_t>(j)] = std::sqrt(s2);
  }
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return norms[static_cast<std::size_t>(x)] >
           norms[static_cast<std::size_t>(y)];
  });

  SvdResult res;
  res.u = Array2(m, n);
  res.v = Array2(n, n);
  res.s.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int src = order[static_cast<std::size_t>(j)];
    const double nrm = norms[static_cast<std::size_t>(src)];
    res.s[static_cast<std::size_t>(j)] = nrm;
    for (int i = 0; i < m; ++i) {
      res.u.at(i, j) = nrm > 1e-300 ? a.at(i, src) / nrm : 0.0;
    }
    for (int i = 0; i < n; ++i) res.v.at(i, j) = v.at(i, src);
  }
  if (transposed) std::swap(res.u, res.v);
  return res;
}

// Frobenius norm of the tail singular values: the best-achievable
// approximation error of any rank-d factorization (Eckart-Young).
inline double rank_truncation_error(const std::vector<double>& s, int d) {
  double tail = 0.0;
  for (std::size_t i = static_cast<std::size_t>(std::max(d, 0)); i < s.size();
       ++i) {
    tail += s[i] * s[i];
  }
  return std::sqrt(tail);
}

}  // namespace fbrl

#endif  // FBRL_LINALG_HPP_
