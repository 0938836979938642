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

#ifndef FBRL_AUTODIFF_HPP_
#define FBRL_AUTODIFF_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fbrl/array.hpp"
#include "fbrl/common.hpp"

namespace fbrl {

// A named trainable array with its gradient accumulator and Adam state.
// Parameters live outside any tape; tapes reference them through leaf nodes.
struct Parameter {
  std::string name;
  Array2 value;
  Array2 grad;
  Array2 adam_m;
  Array2 adam_v;
  long long adam_t = 0;

  Parameter() = default;
  Parameter(std::string n, Array2 init)
      : name(std::move(n)),
        value(std::move(init)),
        grad(value.rows, value.cols),
        adam_m(value.rows, value.cols),
        adam_v(value.rows, value.cols) {}

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid for that tape's
// lifetime.
struct Var {
  int id = -1;
  Tape* tape = nullptr;
};

// Reverse-mode tape over Array2 values. Nodes are appended in evaluation
// order, which is automatically topological (an op can only consume
// already-recorded nodes); backward() walks them exactly once in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }

  const Array2& val(Var v) const { return node(v).val; }
  const Array2& grad(Var v) const { return node(v).grad; }
  double scalar(Var v) const {
    const Array2& a = val(v);
    if (a.rows != 1 || a.cols != 1) {
      throw ContractError("scalar() on non-scalar node " + a.shape_str());
    }
    return a.data[0];
  }

  // ---- leaves ----

  // Trainable leaf: gradients reaching it are accumulated into p.grad.
  Var leaf(Parameter& p) {
    Var v = push(p.value);
    node(v).param = &p;
    return v;
  }

  // Non-trainable leaf (inputs, masks, detached values).
  Var constant(Array2 a) { return push(std::move(a)); }

  // Detach: value copy with no gradient path.
  Var detach(Var a) { return constant(val(a)); }

  // ---- ops ----

  Var matmul(Var a, Var b) {
    Var out = push(matmul_value(val(a), val(b)));
    record(out, {a, b}, [](Tape& t, const Node& n) {
      // dA = G B^T ; dB = A^T G
      const Array2& g = n.grad;
      const Array2& av = t.node_at(n.parents[0]).val;
      const Array2& bv = t.node_at(n.parents[1]).val;
      accumulate(t.node_at(n.parents[0]).grad,
                 matmul_value(g, transpose_value(bv)));
      accumulate(t.node_at(n.parents[1]).grad,
                 matmul_value(transpose_value(av), g));
    });
    return out;
  }

  Var transpose(Var a) {
    Var out = push(transpose_value(val(a)));
    record(out, {a}, [](Tape& t, const Node& n) {
      accumulate(t.node_at(n.parents[0]).grad, transpose_value(n.grad));
    });
    return out;
  }

  // Binary elementwise ops. `b` must have the shape of `a`, or broadcast to
  // it as a 1xC row, an Rx1 column, or a 1x1 scalar.
  Var add(Var a, Var b) { return binary(a, b, BinOp::kAdd); }
  Var sub(Var a, Var b) { return binary(a, b, BinOp::kSub); }
  Var mul(Var a, Var b) { return binary(a, b, BinOp::kMul); }

  Var relu(Var a) {
    Array2 y = val(a);
    for (double& x : y.data) x = x > 0.0 ? x : 0.0;
    Var out = push(std::move(y));
    record(out, {a}, [](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      for (std::size_t i = 0; i < pa.val.size(); ++i) {
        if (pa.val.data[i] > 0.0) pa.grad.data[i] += n.grad.data[i];
      }
    });
    return out;
  }

  Var tanh(Var a) {
    Array2 y = val(a);
    for (double& x : y.data) x = std::tanh(x);
    Var out = push(std::move(y));
    record(out, {a}, [](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      for (std::size_t i = 0; i < pa.val.size(); ++i) {
        const double th = n.val.data[i];
        pa.grad.data[i] += n.grad.data[i] * (1.0 - th * th);
      }
    });
    return out;
  }

  Var exp(Var a) {
    Array2 y = val(a);
    for (double& x : y.data) x = std::exp(x);
    Var out = push(std::move(y));
    record(out, {a}, [](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      for (std::size_t i = 0; i < pa.val.size(); ++i) {
        pa.grad.data[i] += n.grad.data[i] * n.val.data[i];
      }
    });
    return out;
  }

  Var log(Var a) {
    Array2 y = val(a);
    for (double& x : y.data) x = std::log(x);
    Var out = push(std::move(y));
    record(out, {a}, [](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      for (std::size_t i = 0; i < pa.val.size(); ++i) {
        pa.grad.data[i] += n.grad.data[i] / pa.val.data[i];
      }
    });
    return out;
  }

  Var square(Var a) {
    Array2 y = val(a);
    for (double& x : y.data) x = x * x;
    Var out = push(std::move(y));
    record(out, {a}, [](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      for (std::size_t i = 0; i < pa.val.size(); ++i) {
        pa.grad.data[i] += n.grad.data[i] * 2.0 * pa.val.data[i];
      }
    });
    return out;
  }

  // Elementwise minimum; on ties the gradient routes to `a` (deterministic).
  Var min2(Var a, Var b) {
    check_same_shape(val(a), val(b), "min2");
    Array2 y = val(a);
    const Array2& bv = val(b);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y.data[i] = y.data[i] <= bv.data[i] ? y.data[i] : bv.data[i];
    }
    Var out = push(std::move(y));
    record(out, {a, b}, [](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      Node& pb = t.node_at(n.parents[1]);
      for (std::size_t i = 0; i < n.val.size(); ++i) {
        if (pa.val.data[i] <= pb.val.data[i]) {
          pa.grad.data[i] += n.grad.data[i];
        } else {
          pb.grad.data[i] += n.grad.data[i];
        }
      }
    });
    return out;
  }

  Var scale(Var a, double c) {
    Array2 y = val(a);
    for (double& x : y.data) x *= c;
    Var out = push(std::move(y));
    record(out, {a}, [c](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      for (std::size_t i = 0; i < pa.grad.size(); ++i) {
        pa.grad.data[i] += n.grad.data[i] * c;
      }
    });
    return out;
  }

  Var add_scalar(Var a, double c) {
    Array2 y = val(a);
    for (double& x : y.data) x += c;
    Var out = push(std::move(y));
    record(out, {a}, [](Tape& t, const Node& n) {
      accumulate(t.node_at(n.parents[0]).grad, n.grad);
    });
    return out;
  }

  // max(x, c) elementwise against a constant; gradient is zero where clamped
  // (and on exact ties, matching relu's open-interval convention).
  Var max_scalar(Var a, double c) {
    Array2 y = val(a);
    for (double& x : y.data) x = x > c ? x : c;
    Var out = push(std::move(y));
    record(out, {a}, [c](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      for (std::size_t i = 0; i < pa.val.size(); ++i) {
        if (pa.val.data[i] > c) pa.grad.data[i] += n.grad.data[i];
      }
    });
    return out;
  }

  Var sum_all(Var a) {
    double s = 0.0;
    for (double x : val(a).data) s += x;
    Var out = push(Array2(1, 1, s));
    record(out, {a}, [](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      const double g = n.grad.data[0];
      for (double& x : pa.grad.data) x += g;
    });
    return out;
  }

  Var mean_all(Var a) {
    const double inv = 1.0 / static_cast<double>(val(a).size());
    return scale(sum_all(a), inv);
  }

  Var rowwise_sum(Var a) {
    const Array2& x = val(a);
    Array2 y(x.rows, 1);
    for (int r = 0; r < x.rows; ++r) {
      double s = 0.0;
      for (int c = 0; c < x.cols; ++c) s += x.at(r, c);
      y.at(r, 0) = s;
    }
    Var out = push(std::move(y));
    record(out, {a}, [](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      for (int r = 0; r < pa.grad.rows; ++r) {
        const double g = n.grad.at(r, 0);
        for (int c = 0; c < pa.grad.cols; ++c) pa.grad.at(r, c) += g;
      }
    });
    return out;
  }

  // Trace of a square matrix as a 1x1 node.
  Var trace(Var a) {
    const Array2& x = val(a);
    if (x.rows != x.cols) {
      throw DimensionError("trace: non-square " + x.shape_str());
    }
    double s = 0.0;
    for (int i = 0; i < x.rows; ++i) s += x.at(i, i);
    Var out = push(Array2(1, 1, s));
    record(out, {a}, [](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      const double g = n.grad.data[0];
      for (int i = 0; i < pa.grad.rows; ++i) pa.grad.at(i, i) += g;
    });
    return out;
  }

  Var concat_cols(Var a, Var b) {
    const Array2& x = val(a);
    const Array2& y = val(b);
    if (x.rows != y.rows) {
      throw DimensionError("concat_cols: row mismatch " + x.shape_str() +
                           " vs " + y.shape_str());
    }
    Array2 out_v(x.rows, x.cols + y.cols);
    for (int r = 0; r < x.rows; ++r) {
      for (int c = 0; c < x.cols; ++c) out_v.at(r, c) = x.at(r, c);
      for (int c = 0; c < y.cols; ++c) out_v.at(r, x.cols + c) = y.at(r, c);
    }
    Var out = push(std::move(out_v));
    const int split = x.cols;
    record(out, {a, b}, [split](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      Node& pb = t.node_at(n.parents[1]);
      for (int r = 0; r < n.grad.rows; ++r) {
        for (int c = 0; c < split; ++c) pa.grad.at(r, c) += n.grad.at(r, c);
        for (int c = split; c < n.grad.cols; ++c) {
          pb.grad.at(r, c - split) += n.grad.at(r, c);
        }
      }
    });
    return out;
  }

  // Columns [c0, c1) of a.
  Var slice_cols(Var a, int c0, int c1) {
    const Array2& x = val(a);
    if (c0 < 0 || c1 > x.cols || c0 >= c1) {
      throw DimensionError("slice_cols: bad range [" + std::to_string(c0) +
                           "," + std::to_string(c1) + ") for " + x.shape_str());
    }
    Array2 y(x.rows, c1 - c0);
    for (int r = 0; r < x.rows; ++r)
      for (int c = c0; c < c1; ++c) y.at(r, c - c0) = x.at(r, c);
    Var out = push(std::move(y));
    record(out, {a}, [c0](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      for (int r = 0; r < n.grad.rows; ++r)
        for (int c = 0; c < n.grad.cols; ++c)
          pa.grad.at(r, c0 + c) += n.grad.at(r, c);
    });
    return out;
  }

  // Rows of `a` gathered by index (with repetition allowed): out[r] = a[idx[r]].
  Var gather_rows(Var a, std::vector<int> idx) {
    const Array2& x = val(a);
    Array2 y(static_cast<int>(idx.size()), x.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] < 0 || idx[r] >= x.rows) {
        throw ContractError("gather_rows: index out of range");
      }
      for (int c = 0; c < x.cols; ++c)
        y.at(static_cast<int>(r), c) = x.at(idx[r], c);
    }
    Var out = push(std::move(y));
    record(out, {a}, [idx = std::move(idx)](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (int c = 0; c < n.grad.cols; ++c)
          pa.grad.at(idx[r], c) += n.grad.at(static_cast<int>(r), c);
    });
    return out;
  }

  // Per-row element selection: out[r, 0] = a[r, idx[r]].
  Var select_per_row(Var a, std::vector<int> idx) {
    const Array2& x = val(a);
    if (static_cast<int>(idx.size()) != x.rows) {
      throw DimensionError("select_per_row: need one index per row");
    }
    Array2 y(x.rows, 1);
    for (int r = 0; r < x.rows; ++r) {
      if (idx[r] < 0 || idx[r] >= x.cols) {
        throw ContractError("select_per_row: index out of range");
      }
      y.at(r, 0) = x.at(r, idx[r]);
    }
    Var out = push(std::move(y));
    record(out, {a}, [idx = std::move(idx)](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      for (int r = 0; r < pa.grad.rows; ++r)
        pa.grad.at(r, idx[r]) += n.grad.at(r, 0);
    });
    return out;
  }

  Var softmax_rows(Var a) {
    Array2 y = val(a);
    softmax_rows_value(y);
    Var out = push(std::move(y));
    record(out, {a}, [](Tape& t, const Node& n) {
      // dx = s * (g - sum(g*s)) rowwise
      Node& pa = t.node_at(n.parents[0]);
      for (int r = 0; r < n.val.rows; ++r) {
        double dot = 0.0;
        for (int c = 0; c < n.val.cols; ++c)
          dot += n.grad.at(r, c) * n.val.at(r, c);
        for (int c = 0; c < n.val.cols; ++c)
          pa.grad.at(r, c) += n.val.at(r, c) * (n.grad.at(r, c) - dot);
      }
    });
    return out;
  }

  Var log_softmax_rows(Var a) {
    Array2 y = val(a);
    for (int r = 0; r < y.rows; ++r) {
      double mx = y.at(r, 0);
      for (int c = 1; c < y.cols; ++c) mx = std::max(mx, y.at(r, c));
      double lse = 0.0;
      for (int c = 0; c < y.cols; ++c) lse += std::exp(y.at(r, c) - mx);
      lse = mx + std::log(lse);
      for (int c = 0; c < y.cols; ++c) y.at(r, c) -= lse;
    }
    Var out = push(std::move(y));
    record(out, {a}, [](Tape& t, const Node& n) {
      // dx = g - softmax * rowsum(g)
      Node& pa = t.node_at(n.parents[0]);
      for (int r = 0; r < n.val.rows; ++r) {
        double gsum = 0.0;
        for (int c = 0; c < n.val.cols; ++c) gsum += n.grad.at(r, c);
        for (int c = 0; c < n.val.cols; ++c) {
          pa.grad.at(r, c) +=
              n.grad.at(r, c) - std::exp(n.val.at(r, c)) * gsum;
        }
      }
    });
    return out;
  }

  // Row-wise layer normalization without affine terms:
  // y = (x - mean) / sqrt(var + eps).
  Var layer_norm_rows(Var a, double eps = 1e-5) {
    const Array2& x = val(a);
    Array2 y(x.rows, x.cols);
    Array2 inv_sd(x.rows, 1);
    for (int r = 0; r < x.rows; ++r) {
      double mu = 0.0;
      for (int c = 0; c < x.cols; ++c) mu += x.at(r, c);
      mu /= x.cols;
      double var = 0.0;
      for (int c = 0; c < x.cols; ++c) {
        const double d = x.at(r, c) - mu;
        var += d * d;
      }
      var /= x.cols;
      const double inv = 1.0 / std::sqrt(var + eps);
      inv_sd.at(r, 0) = inv;
      for (int c = 0; c < x.cols; ++c) y.at(r, c) = (x.at(r, c) - mu) * inv;
    }
    Var out = push(std::move(y));
    record(out, {a}, [inv_sd = std::move(inv_sd)](Tape& t, const Node& n) {
      // dx = inv_sd * (g - mean(g) - y * mean(g*y)) rowwise
      Node& pa = t.node_at(n.parents[0]);
      for (int r = 0; r < n.val.rows; ++r) {
        const int cc = n.val.cols;
        double gmean = 0.0;
        double gymean = 0.0;
        for (int c = 0; c < cc; ++c) {
          gmean += n.grad.at(r, c);
          gymean += n.grad.at(r, c) * n.val.at(r, c);
        }
        gmean /= cc;
        gymean /= cc;
        const double inv = inv_sd.at(r, 0);
        for (int c = 0; c < cc; ++c) {
          pa.grad.at(r, c) +=
              inv * (n.grad.at(r, c) - gmean - n.val.at(r, c) * gymean);
        }
      }
    });
    return out;
  }

  // Rescales each row-block (column ranges given by block_sizes) of each row
  // to Euclidean norm sqrt(block_size). The backward projects out the radial
  // component: for y = c*x/|x|, dx = (c/|x|) (g - x_hat (x_hat . g)).
  Var block_renorm_rows(Var a, const std::vector<int>& block_sizes) {
    const Array2& x = val(a);
    int total = 0;
    for (int b : block_sizes) total += b;
    if (total != x.cols) {
      throw DimensionError("block_renorm_rows: blocks sum to " +
                           std::to_string(total) + ", array has " +
                           std::to_string(x.cols) + " cols");
    }
    Array2 y(x.rows, x.cols);
    for (int r = 0; r < x.rows; ++r) {
      int off = 0;
      for (int b : block_sizes) {
        double nrm = 0.0;
        for (int c = off; c < off + b; ++c) nrm += x.at(r, c) * x.at(r, c);
        nrm = std::sqrt(nrm);
        if (nrm < 1e-300) {
          throw NumericError("block_renorm_rows: zero-norm block");
        }
        const double f = std::sqrt(static_cast<double>(b)) / nrm;
        for (int c = off; c < off + b; ++c) y.at(r, c) = x.at(r, c) * f;
        off += b;
      }
    }
    Var out = push(std::move(y));
    record(out, {a},
           [bs = block_sizes](Tape& t, const Node& n) {
             Node& pa = t.node_at(n.parents[0]);
             const Array2& x = pa.val;
             for (int r = 0; r < x.rows; ++r) {
               int off = 0;
               for (int b : bs) {
                 double nrm2 = 0.0;
                 double xg = 0.0;
                 for (int c = off; c < off + b; ++c) {
                   nrm2 += x.at(r, c) * x.at(r, c);
                   xg += x.at(r, c) * n.grad.at(r, c);
                 }
                 const double nrm = std::sqrt(nrm2);
                 const double f = std::sqrt(static_cast<double>(b)) / nrm;
                 for (int c = off; c < off + b; ++c) {
                   pa.grad.at(r, c) +=
                       f * (n.grad.at(r, c) - x.at(r, c) * xg / nrm2);
                 }
                 off += b;
               }
             }
           });
    return out;
  }

  // y = x (w .* mask) + bias, with bias broadcast across rows. Gradients to
  // masked-out weights are exactly zero by construction of dW = (x^T g) .* mask.
  Var masked_linear(Var x, Parameter& w, const Array2& mask, Parameter& bias) {
    check_same_shape(w.value, mask, "masked_linear(mask)");
    if (bias.value.rows != 1 || bias.value.cols != w.value.cols) {
      throw DimensionError("masked_linear: bias must be 1x" +
                           std::to_string(w.value.cols) + ", got " +
                           bias.value.shape_str());
    }
    Var wv = leaf(w);
    Var bv = leaf(bias);
    Var mv = constant(mask);
    Var wm = mul(wv, mv);
    return add(matmul(x, wm), bv);
  }

  // Unmasked affine layer y = x w + bias.
  Var linear(Var x, Parameter& w, Parameter& bias) {
    if (bias.value.rows != 1 || bias.value.cols != w.value.cols) {
      throw DimensionError("linear: bias must be 1x" +
                           std::to_string(w.value.cols) + ", got " +
                           bias.value.shape_str());
    }
    return add(matmul(x, leaf(w)), leaf(bias));
  }

  // ---- backward ----

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every Parameter
  // reachable from `loss`. Requires a 1x1 node. May be called repeatedly;
  // parameter gradients then accumulate (call zero_grad between steps).
  void backward(Var loss) {
    const Array2& lv = val(loss);
    if (lv.rows != 1 || lv.cols != 1) {
      throw ContractError("backward: loss must be scalar, got " +
                          lv.shape_str());
    }
    for (Node& n : nodes_) n.grad.fill(0.0);
    node(loss).grad.data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back) n.back(*this, n);
      if (n.param) accumulate(n.param->grad, n.grad);
    }
  }

 private:
  enum class BinOp { kAdd, kSub, kMul };

  struct Node {
    Array2 val;
    Array2 grad;
    std::vector<int> parents;
    std::function<void(Tape&, const Node&)> back;
    Parameter* param = nullptr;
  };

  static void accumulate(Array2& into, const Array2& g) {
    for (std::size_t i = 0; i < into.size(); ++i) into.data[i] += g.data[i];
  }

  static void softmax_rows_value(Array2& y) {
    for (int r = 0; r < y.rows; ++r) {
      double mx = y.at(r, 0);
      for (int c = 1; c < y.cols; ++c) mx = std::max(mx, y.at(r, c));
      double sum = 0.0;
      for (int c = 0; c < y.cols; ++c) {
        y.at(r, c) = std::exp(y.at(r, c) - mx);
        sum += y.at(r, c);
      }
      for (int c = 0; c < y.cols; ++c) y.at(r, c) /= sum;
    }
  }

  Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
  const Node& node(Var v) const {
    return nodes_.at(static_cast<std::size_t>(v.id));
  }
  Node& node_at(int id) { return nodes_.at(static_cast<std::size_t>(id)); }

  Var push(Array2 v) {
    Node n;
    n.grad = Array2(v.rows, v.cols);
    n.val = std::move(v);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1, this};
  }

  void record(Var out, std::vector<Var> parents,
              std::function<void(Tape&, const Node&)> back) {
    Node& n = node(out);
    n.parents.reserve(parents.size());
    for (Var p : parents) {
      if (p.tape != this) {
        throw ContractError("op mixes nodes from different tapes");
      }
      n.parents.push_back(p.id);
    }
    n.back = std::move(back);
  }

  // How `b` broadcasts onto `a`'s shape.
  enum class Bcast { kSame, kRow, kCol, kScalar };

  static Bcast broadcast_kind(const Array2& a, const Array2& b,
                              const char* op) {
    if (a.same_shape(b)) return Bcast::kSame;
    if (b.rows == 1 && b.cols == 1) return Bcast::kScalar;
    if (b.rows == 1 && b.cols == a.cols) return Bcast::kRow;
    if (b.cols == 1 && b.rows == a.rows) return Bcast::kCol;
    throw DimensionError(std::string(op) + ": cannot broadcast " +
                         b.shape_str() + " onto " + a.shape_str());
  }

  static double bval(const Array2& b, Bcast k, int r, int c) {
    switch (k) {
      case Bcast::kSame: return b.at(r, c);
      case Bcast::kRow: return b.at(0, c);
      case Bcast::kCol: return b.at(r, 0);
      case Bcast::kScalar: return b.data[0];
    }
    return 0.0;
  }

  static double& bgrad(Array2& b, Bcast k, int r, int c) {
    switch (k) {
      case Bcast::kSame: return b.at(r, c);
      case Bcast::kRow: return b.at(0, c);
      case Bcast::kCol: return b.at(r, 0);
      case Bcast::kScalar: return b.data[0];
    }
    return b.data[0];
  }

  Var binary(Var a, Var b, BinOp op) {
    const Array2& x = val(a);
    const Array2& y = val(b);
    const char* name = op == BinOp::kAdd ? "add"
                       : op == BinOp::kSub ? "sub"
                                           : "mul";
    const Bcast k = broadcast_kind(x, y, name);
    Array2 out_v(x.rows, x.cols);
    for (int r = 0; r < x.rows; ++r) {
      for (int c = 0; c < x.cols; ++c) {
        const double bv = bval(y, k, r, c);
        switch (op) {
          case BinOp::kAdd: out_v.at(r, c) = x.at(r, c) + bv; break;
          case BinOp::kSub: out_v.at(r, c) = x.at(r, c) - bv; break;
          case BinOp::kMul: out_v.at(r, c) = x.at(r, c) * bv; break;
        }
      }
    }
    Var out = push(std::move(out_v));
    record(out, {a, b}, [op, k](Tape& t, const Node& n) {
      Node& pa = t.node_at(n.parents[0]);
      Node& pb = t.node_at(n.parents[1]);
      for (int r = 0; r < n.grad.rows; ++r) {
        for (int c = 0; c < n.grad.cols; ++c) {
          const double g = n.grad.at(r, c);
          switch (op) {
            case BinOp::kAdd:
              pa.grad.at(r, c) += g;
              bgrad(pb.grad, k, r, c) += g;
              break;
            case BinOp::kSub:
              pa.grad.at(r, c) += g;
              bgrad(pb.grad, k, r, c) -= g;
              break;
            case BinOp::kMul:
              pa.grad.at(r, c) += g * bval(pb.val, k, r, c);
              bgrad(pb.grad, k, r, c) += g * pa.val.at(r, c);
              break;
          }
        }
      }
    });
    return out;
  }

  std::vector<Node> nodes_;
};

// ---- optimizer & target updates ----

// Standard Adam with per-parameter moment state stored on the Parameter.
inline void adam_step(const std::vector<Parameter*>& params, double lr,
                      double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
  for (Parameter* p : params) {
    p->adam_t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p->adam_t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p->adam_t));
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad.data[i];
      p->adam_m.data[i] = beta1 * p->adam_m.data[i] + (1.0 - beta1) * g;
      p->adam_v.data[i] = beta2 * p->adam_v.data[i] + (1.0 - beta2) * g * g;
      const double mhat = p->adam_m.data[i] / bc1;
      const double vhat = p->adam_v.data[i] / bc2;
      p->value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

inline void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

// target <- zeta*target + (1-zeta)*online, elementwise.
inline void polyak_update(Parameter& target, const Parameter& online,
                          double zeta) {
  if (zeta < 0.0 || zeta > 1.0) {
    throw ContractError("polyak_update: zeta must be in [0,1], got " +
                        format_g17(zeta));
  }
  check_same_shape(target.value, online.value, "polyak_update");
  for (std::size_t i = 0; i < target.value.size(); ++i) {
    target.value.data[i] =
        zeta * target.value.data[i] + (1.0 - zeta) * online.value.data[i];
  }
}

}  // namespace fbrl

#endif  // FBRL_AUTODIFF_HPP_
