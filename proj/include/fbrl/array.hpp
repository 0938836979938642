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

#ifndef FBRL_ARRAY_HPP_
#define FBRL_ARRAY_HPP_

#include <cmath>
#include <initializer_list>
#include <string>
#include <vector>

#include "fbrl/common.hpp"
#include "fbrl/rng.hpp"

namespace fbrl {

// Dense row-major matrix of 64-bit floats. Value type: copies are deep.
// All shapes at this scale are small, so there are no views or strides.
struct Array2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Array2() = default;
  Array2(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw DimensionError("negative array dimension");
  }

  static Array2 from(std::initializer_list<std::initializer_list<double>> v) {
    Array2 a(static_cast<int>(v.size()),
             v.size() ? static_cast<int>(v.begin()->size()) : 0);
    int r = 0;
    for (const auto& row : v) {
      if (static_cast<int>(row.size()) != a.cols) {
        throw DimensionError("ragged initializer for Array2");
      }
      int c = 0;
      for (double x : row) a.at(r, c++) = x;
      ++r;
    }
    return a;
  }

  static Array2 identity(int n) {
    Array2 a(n, n);
    for (int i = 0; i < n; ++i) a.at(i, i) = 1.0;
    return a;
  }

  // One row vector repeated r times (broadcasting a task vector over a batch).
  static Array2 tile_rows(const std::vector<double>& row, int r) {
    Array2 a(r, static_cast<int>(row.size()));
    for (int i = 0; i < r; ++i) {
      for (int c = 0; c < a.cols; ++c) {
        a.at(i, c) = row[static_cast<std::size_t>(c)];
      }
    }
    return a;
  }

  static Array2 uniform(int r, int c, double lo, double hi, Rng& rng) {
    Array2 a(r, c);
    for (double& x : a.data) x = rng.uniform(lo, hi);
    return a;
  }

  static Array2 normal(int r, int c, double stddev, Rng& rng) {
    Array2 a(r, c);
    for (double& x : a.data) x = stddev * rng.normal();
    return a;
  }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Array2& o) const {
    return rows == o.rows && cols == o.cols;
  }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }

  bool finite() const { return all_finite(data); }

  double frobenius_norm() const {
    double s = 0.0;
    for (double x : data) s += x * x;
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : data) m = std::max(m, std::fabs(x));
    return m;
  }

  void fill(double v) {
    for (double& x : data) x = v;
  }
};

inline void check_same_shape(const Array2& a, const Array2& b,
                             const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         a.shape_str() + " vs " + b.shape_str());
  }
}

// Plain (untaped) matrix product, also the building block the autodiff
// op delegates to. Loop order i-k-j for cache friendliness.
inline Array2 matmul_value(const Array2& a, const Array2& b) {
  if (a.cols != b.rows) {
    throw DimensionError("matmul: inner dimensions differ, " + a.shape_str() +
                         " vs " + b.shape_str());
  }
  Array2 out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<std::size_t>(i) * a.cols];
    double* orow = &out.data[static_cast<std::size_t>(i) * out.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[static_cast<std::size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

inline Array2 transpose_value(const Array2& a) {
  Array2 out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

}  // namespace fbrl

#endif  // FBRL_ARRAY_HPP_
