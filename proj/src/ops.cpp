// Copyright 2026 The avvit Authors. All Rights Reserved.
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

#include "avvit/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "avvit/error.hpp"

namespace avvit {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void gemm(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
          std::int64_t n, bool transpose_a, bool transpose_b, bool accumulate) {
  MutMap C(c, m, n);
  if (!accumulate) C.setZero();
  if (m == 0 || n == 0 || k == 0) return;
  ConstMap A(a, transpose_a ? k : m, transpose_a ? m : k);
  ConstMap B(b, transpose_b ? n : k, transpose_b ? k : n);
  if (!transpose_a && !transpose_b) {
    C.noalias() += A * B;
  } else if (transpose_a && !transpose_b) {
    C.noalias() += A.transpose() * B;
  } else if (!transpose_a && transpose_b) {
    C.noalias() += A * B.transpose();
  } else {
    C.noalias() += A.transpose() * B.transpose();
  }
}

Tensor record_op(const char* name, std::vector<Tensor> inputs, Tensor out, OpCost cost,
                 std::string meta, std::function<void(const Tensor&)> backward,
                 std::function<Tensor()> forward) {
  if (finite_checks_enabled()) {
    for (double v : out.values()) {
      if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite output from ") + name + " in scope " +
                           current_scope());
      }
    }
  }
  bool needs_grad = false;
  for (const auto& t : inputs) needs_grad = needs_grad || t.requires_grad();
  out.set_requires_grad(needs_grad);
  if (Graph* g = active_graph()) {
    OpRecord rec;
    rec.name = name;
    rec.scope = current_scope();
    rec.mult_adds = cost.mult_adds;
    rec.flops = cost.flops;
    if (g->mode() == Graph::Mode::kRecord) {
      rec.meta = std::move(meta);
      rec.inputs = std::move(inputs);
      rec.output = out;
      if (needs_grad) rec.backward = std::move(backward);
      rec.forward = std::move(forward);
    }
    g->append(std::move(rec));
  }
  return out;
}

}  // namespace detail

using detail::gemm;
using detail::OpCost;
using detail::record_op;

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

std::int64_t rows_of(const Tensor& x) { return x.size() / x.dim(-1); }

template <typename F>
Tensor map_unary(const Tensor& x, F f) {
  Tensor out(x.shape());
  auto src = x.values();
  auto dst = out.mutable_values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

// Backward for y = f(x) given dy/dx as a function of (x, y).
template <typename D>
std::function<void(const Tensor&)> unary_backward(const Tensor& x, D deriv) {
  return [x, deriv](const Tensor& out) mutable {
    if (!x.requires_grad()) return;
    auto g = out.grad();
    auto xv = x.values();
    auto yv = out.values();
    auto dx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * deriv(xv[i], yv[i]);
  };
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

std::string shapes_meta(std::initializer_list<Shape> shapes) {
  std::ostringstream os;
  bool first = true;
  for (const auto& s : shapes) {
    if (!first) os << ',';
    os << to_string(s);
    first = false;
  }
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, "matmul expects rank-2 operands, got " +
                                              to_string(a.shape()) + " and " +
                                              to_string(b.shape()));
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul inner dimensions differ: " + to_string(a.shape()) + " x " +
                             to_string(b.shape()));
  auto fw = [a, b, m, k, n] {
    Tensor out({m, n});
    gemm(a.data(), b.data(), out.mutable_data(), m, k, n, false, false, false);
    return out;
  };
  auto bw = [a, b, m, k, n](const Tensor& out) mutable {
    if (a.requires_grad()) gemm(out.grad().data(), b.data(), a.mutable_grad().data(), m, n, k,
                                false, true, true);
    if (b.requires_grad()) gemm(a.data(), out.grad().data(), b.mutable_grad().data(), k, m, n,
                                true, false, true);
  };
  return record_op("matmul", {a, b}, fw(), {m * k * n, kFlopsPerMultAdd * m * k * n},
                   shapes_meta({a.shape(), b.shape()}), bw, fw);
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  require(a.rank() == 3 && b.rank() == 3, "bmm expects rank-3 operands");
  const auto batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const auto n = transpose_b ? b.dim(1) : b.dim(2);
  require(b.dim(0) == batch && (transpose_b ? b.dim(2) : b.dim(1)) == k,
          "bmm shape mismatch: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  auto fw = [=] {
    Tensor out({batch, m, n});
    for (std::int64_t i = 0; i < batch; ++i) {
      gemm(a.data() + i * m * k, b.data() + i * k * n, out.mutable_data() + i * m * n, m, k, n,
           false, transpose_b, false);
    }
    return out;
  };
  auto bw = [=](const Tensor& out) mutable {
    const double* g = out.grad().data();
    for (std::int64_t i = 0; i < batch; ++i) {
      const double* gi = g + i * m * n;
      if (a.requires_grad()) {
        // dA = dC * op(B)^T
        gemm(gi, b.data() + i * k * n, a.mutable_grad().data() + i * m * k, m, n, k, false,
             !transpose_b, true);
      }
      if (b.requires_grad()) {
        if (transpose_b) {
          // B is [n x k]: dB = dC^T * A
          gemm(gi, a.data() + i * m * k, b.mutable_grad().data() + i * k * n, n, m, k, true,
               false, true);
        } else {
          gemm(a.data() + i * m * k, gi, b.mutable_grad().data() + i * k * n, k, m, n, true,
               false, true);
        }
      }
    }
  };
  const auto ma = batch * m * k * n;
  return record_op("bmm", {a, b}, fw(), {ma, kFlopsPerMultAdd * ma},
                   shapes_meta({a.shape(), b.shape()}), bw, fw);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require(w.rank() == 2, "linear weight must be rank 2");
  const auto in = w.dim(0), out_dim = w.dim(1);
  require(x.dim(-1) == in, "linear expects last dim " + std::to_string(in) + ", got " +
                               to_string(x.shape()));
  if (bias.defined()) require(bias.rank() == 1 && bias.dim(0) == out_dim, "linear bias shape");
  const auto rows = rows_of(x);
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  auto fw = [=] {
    Tensor out(out_shape);
    double* o = out.mutable_data();
    gemm(x.data(), w.data(), o, rows, in, out_dim, false, false, false);
    if (bias.defined()) {
      const double* bv = bias.data();
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t j = 0; j < out_dim; ++j) o[r * out_dim + j] += bv[j];
      }
    }
    return out;
  };
  auto bw = [=](const Tensor& out) mutable {
    const double* g = out.grad().data();
    if (x.requires_grad()) gemm(g, w.data(), x.mutable_grad().data(), rows, out_dim, in, false,
                                true, true);
    if (w.requires_grad()) gemm(x.data(), g, w.mutable_grad().data(), in, rows, out_dim, true,
                                false, true);
    if (bias.defined() && bias.requires_grad()) {
      auto db = bias.mutable_grad();
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t j = 0; j < out_dim; ++j) db[j] += g[r * out_dim + j];
      }
    }
  };
  const auto ma = rows * in * out_dim;
  const auto flops = kFlopsPerMultAdd * ma + (bias.defined() ? rows * out_dim : 0);
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return record_op("linear", std::move(inputs), fw(), {ma, flops},
                   shapes_meta({x.shape(), w.shape()}), bw, fw);
}

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require(is_suffix(b.shape(), a.shape()),
          "add: " + to_string(b.shape()) + " does not broadcast onto " + to_string(a.shape()));
  const auto inner = b.size();
  auto fw = [a, b, inner] {
    Tensor out(a.shape());
    auto av = a.values();
    auto bv = b.values();
    auto o = out.mutable_values();
    for (std::size_t i = 0; i < av.size(); ++i) o[i] = av[i] + bv[i % inner];
    return out;
  };
  auto bw = [a, b, inner](const Tensor& out) mutable {
    auto g = out.grad();
    if (a.requires_grad()) a.accumulate_grad(g);
    if (b.requires_grad()) {
      auto db = b.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) db[i % inner] += g[i];
    }
  };
  return record_op("add", {a, b}, fw(), {0, a.size()}, shapes_meta({a.shape(), b.shape()}), bw,
                   fw);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "sub: shape mismatch");
  auto fw = [a, b] {
    Tensor out(a.shape());
    auto av = a.values();
    auto bv = b.values();
    auto o = out.mutable_values();
    for (std::size_t i = 0; i < av.size(); ++i) o[i] = av[i] - bv[i];
    return out;
  };
  auto bw = [a, b](const Tensor& out) mutable {
    auto g = out.grad();
    if (a.requires_grad()) a.accumulate_grad(g);
    if (b.requires_grad()) {
      auto db = b.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
    }
  };
  return record_op("sub", {a, b}, fw(), {0, a.size()}, "", bw, fw);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + to_string(a.shape()) + " vs " +
                                      to_string(b.shape()));
  auto fw = [a, b] {
    Tensor out(a.shape());
    auto av = a.values();
    auto bv = b.values();
    auto o = out.mutable_values();
    for (std::size_t i = 0; i < av.size(); ++i) o[i] = av[i] * bv[i];
    return out;
  };
  auto bw = [a, b](const Tensor& out) mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto da = a.mutable_grad();
      auto bv = b.values();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      auto db = b.mutable_grad();
      auto av = a.values();
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
    }
  };
  return record_op("mul", {a, b}, fw(), {0, a.size()}, "", bw, fw);
}

Tensor scale(const Tensor& x, double factor) {
  auto fw = [x, factor] { return map_unary(x, [factor](double v) { return v * factor; }); };
  return record_op("scale", {x}, fw(), {0, x.size()}, "",
                   unary_backward(x, [factor](double, double) { return factor; }), fw);
}

Tensor relu(const Tensor& x) {
  auto fw = [x] { return map_unary(x, [](double v) { return v > 0.0 ? v : 0.0; }); };
  return record_op("relu", {x}, fw(), {0, x.size()}, "",
                   unary_backward(x, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; }), fw);
}

Tensor gelu(const Tensor& x) {
  static constexpr double kInvSqrt2 = 0.70710678118654752440;
  static constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  auto fw = [x] {
    return map_unary(x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
  };
  return record_op("gelu", {x}, fw(), {0, x.size()}, "",
                   unary_backward(x,
                                  [](double v, double) {
                                    return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
                                           v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
                                  }),
                   fw);
}

Tensor tanh(const Tensor& x) {
  auto fw = [x] { return map_unary(x, [](double v) { return std::tanh(v); }); };
  return record_op("tanh", {x}, fw(), {0, x.size()}, "",
                   unary_backward(x, [](double, double y) { return 1.0 - y * y; }), fw);
}

Tensor sigmoid(const Tensor& x) {
  auto fw = [x] {
    return map_unary(x, [](double v) {
      if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
      const double e = std::exp(v);
      return e / (1.0 + e);
    });
  };
  return record_op("sigmoid", {x}, fw(), {0, x.size()}, "",
                   unary_backward(x, [](double, double y) { return y * (1.0 - y); }), fw);
}

Tensor softmax(const Tensor& x) {
  const auto width = x.dim(-1);
  const auto rows = rows_of(x);
  auto fw = [x, width, rows] {
    Tensor out(x.shape());
    const double* xv = x.data();
    double* o = out.mutable_data();
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* xr = xv + r * width;
      double* orow = o + r * width;
      const double mx = *std::max_element(xr, xr + width);
      double total = 0.0;
      for (std::int64_t j = 0; j < width; ++j) total += (orow[j] = std::exp(xr[j] - mx));
      for (std::int64_t j = 0; j < width; ++j) orow[j] /= total;
    }
    return out;
  };
  auto bw = [x, width, rows](const Tensor& out) mutable {
    if (!x.requires_grad()) return;
    const double* g = out.grad().data();
    const double* y = out.data();
    double* dx = x.mutable_grad().data();
    for (std::int64_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::int64_t j = 0; j < width; ++j) dot += g[r * width + j] * y[r * width + j];
      for (std::int64_t j = 0; j < width; ++j) {
        dx[r * width + j] += y[r * width + j] * (g[r * width + j] - dot);
      }
    }
  };
  return record_op("softmax", {x}, fw(), {0, x.size()}, "", bw, fw);
}

Tensor log_softmax(const Tensor& x) {
  const auto width = x.dim(-1);
  const auto rows = rows_of(x);
  auto fw = [x, width, rows] {
    Tensor out(x.shape());
    const double* xv = x.data();
    double* o = out.mutable_data();
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* xr = xv + r * width;
      const double mx = *std::max_element(xr, xr + width);
      double total = 0.0;
      for (std::int64_t j = 0; j < width; ++j) total += std::exp(xr[j] - mx);
      const double lse = mx + std::log(total);
      for (std::int64_t j = 0; j < width; ++j) o[r * width + j] = xr[j] - lse;
    }
    return out;
  };
  auto bw = [x, width, rows](const Tensor& out) mutable {
    if (!x.requires_grad()) return;
    const double* g = out.grad().data();
    const double* y = out.data();
    double* dx = x.mutable_grad().data();
    for (std::int64_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::int64_t j = 0; j < width; ++j) gsum += g[r * width + j];
      for (std::int64_t j = 0; j < width; ++j) {
        dx[r * width + j] += g[r * width + j] - std::exp(y[r * width + j]) * gsum;
      }
    }
  };
  return record_op("log_softmax", {x}, fw(), {0, x.size()}, "", bw, fw);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const auto width = x.dim(-1);
  const auto rows = rows_of(x);
  if (gamma.defined()) require(gamma.shape() == Shape{width}, "layer_norm gamma shape");
  if (beta.defined()) require(beta.shape() == Shape{width}, "layer_norm beta shape");
  auto fw = [=] {
    Tensor out(x.shape());
    const double* xv = x.data();
    double* o = out.mutable_data();
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* xr = xv + r * width;
      double mu = 0.0;
      for (std::int64_t j = 0; j < width; ++j) mu += xr[j];
      mu /= static_cast<double>(width);
      double var = 0.0;
      for (std::int64_t j = 0; j < width; ++j) var += (xr[j] - mu) * (xr[j] - mu);
      var /= static_cast<double>(width);
      const double rstd = 1.0 / std::sqrt(var + eps);
      for (std::int64_t j = 0; j < width; ++j) {
        double v = (xr[j] - mu) * rstd;
        if (gamma.defined()) v *= gamma.at(j);
        if (beta.defined()) v += beta.at(j);
        o[r * width + j] = v;
      }
    }
    return out;
  };
  auto bw = [=](const Tensor& out) mutable {
    const double* g = out.grad().data();
    const double* xv = x.data();
    std::vector<double> xhat(width), dxhat(width);
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* xr = xv + r * width;
      const double* gr = g + r * width;
      double mu = 0.0;
      for (std::int64_t j = 0; j < width; ++j) mu += xr[j];
      mu /= static_cast<double>(width);
      double var = 0.0;
      for (std::int64_t j = 0; j < width; ++j) var += (xr[j] - mu) * (xr[j] - mu);
      var /= static_cast<double>(width);
      const double rstd = 1.0 / std::sqrt(var + eps);
      double mean_d = 0.0, mean_dx = 0.0;
      for (std::int64_t j = 0; j < width; ++j) {
        xhat[j] = (xr[j] - mu) * rstd;
        dxhat[j] = gr[j] * (gamma.defined() ? gamma.at(j) : 1.0);
        mean_d += dxhat[j];
        mean_dx += dxhat[j] * xhat[j];
      }
      mean_d /= static_cast<double>(width);
      mean_dx /= static_cast<double>(width);
      if (x.requires_grad()) {
        double* dx = x.mutable_grad().data() + r * width;
        for (std::int64_t j = 0; j < width; ++j) {
          dx[j] += rstd * (dxhat[j] - mean_d - xhat[j] * mean_dx);
        }
      }
      if (gamma.defined() && gamma.requires_grad()) {
        auto dg = gamma.mutable_grad();
        for (std::int64_t j = 0; j < width; ++j) dg[j] += gr[j] * xhat[j];
      }
      if (beta.defined() && beta.requires_grad()) {
        auto db = beta.mutable_grad();
        for (std::int64_t j = 0; j < width; ++j) db[j] += gr[j];
      }
    }
  };
  std::vector<Tensor> inputs{x};
  if (gamma.defined()) inputs.push_back(gamma);
  if (beta.defined()) inputs.push_back(beta);
  return record_op("layer_norm", std::move(inputs), fw(), {0, x.size()}, "", bw, fw);
}

Tensor sum(const Tensor& x) {
  auto fw = [x] {
    double total = 0.0;
    for (double v : x.values()) total += v;
    return Tensor::scalar(total);
  };
  auto bw = [x](const Tensor& out) mutable {
    if (!x.requires_grad()) return;
    const double g = out.grad()[0];
    for (double& d : x.mutable_grad()) d += g;
  };
  return record_op("sum", {x}, fw(), {0, x.size()}, "", bw, fw);
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.size());
  auto fw = [x, n] {
    double total = 0.0;
    for (double v : x.values()) total += v;
    return Tensor::scalar(total / n);
  };
  auto bw = [x, n](const Tensor& out) mutable {
    if (!x.requires_grad()) return;
    const double g = out.grad()[0] / n;
    for (double& d : x.mutable_grad()) d += g;
  };
  return record_op("mean", {x}, fw(), {0, x.size()}, "", bw, fw);
}

// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  require(numel(shape) == x.size(),
          "reshape " + to_string(x.shape()) + " -> " + to_string(shape) + " changes size");
  auto fw = [x, shape] { return x.reshaped(shape); };
  auto bw = [x](const Tensor& out) mutable {
    if (x.requires_grad()) x.accumulate_grad(out.grad());
  };
  return record_op("reshape", {x}, fw(), {}, "", bw, fw);
}

namespace {

struct PermutePlan {
  Shape out_shape;
  std::vector<std::int64_t> in_strides_for_out;  // stride in x for each output axis
};

PermutePlan plan_permute(const Shape& in, const std::vector<int>& perm) {
  const int r = static_cast<int>(in.size());
  require(static_cast<int>(perm.size()) == r, "permute: rank mismatch");
  std::vector<int> seen(r, 0);
  std::vector<std::int64_t> strides(r, 1);
  for (int i = r - 2; i >= 0; --i) strides[i] = strides[i + 1] * in[i + 1];
  PermutePlan p;
  for (int axis : perm) {
    require(axis >= 0 && axis < r && !seen[axis], "permute: invalid axis order");
    seen[axis] = 1;
    p.out_shape.push_back(in[axis]);
    p.in_strides_for_out.push_back(strides[axis]);
  }
  return p;
}

// Calls f(out_index, in_index) for every element in output order.
template <typename F>
void for_each_permuted(const PermutePlan& p, F f) {
  const int r = static_cast<int>(p.out_shape.size());
  std::vector<std::int64_t> idx(r, 0);
  const std::int64_t total = numel(p.out_shape);
  std::int64_t src = 0;
  for (std::int64_t o = 0; o < total; ++o) {
    f(o, src);
    for (int axis = r - 1; axis >= 0; --axis) {
      ++idx[axis];
      src += p.in_strides_for_out[axis];
      if (idx[axis] < p.out_shape[axis]) break;
      src -= p.in_strides_for_out[axis] * idx[axis];
      idx[axis] = 0;
    }
  }
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  const auto plan = plan_permute(x.shape(), perm);
  auto fw = [x, plan] {
    Tensor out(plan.out_shape);
    const double* src = x.data();
    double* dst = out.mutable_data();
    for_each_permuted(plan, [&](std::int64_t o, std::int64_t i) { dst[o] = src[i]; });
    return out;
  };
  auto bw = [x, plan](const Tensor& out) mutable {
    if (!x.requires_grad()) return;
    const double* g = out.grad().data();
    double* dx = x.mutable_grad().data();
    for_each_permuted(plan, [&](std::int64_t o, std::int64_t i) { dx[i] += g[o]; });
  };
  return record_op("permute", {x}, fw(), {}, "", bw, fw);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  require(!parts.empty(), "concat of nothing");
  const int r = parts[0].rank();
  if (axis < 0) axis += r;
  require(axis >= 0 && axis < r, "concat: axis out of range");
  Shape out_shape = parts[0].shape();
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    require(p.rank() == r, "concat: rank mismatch");
    for (int i = 0; i < r; ++i) {
      if (i != axis) {
        require(p.dim(i) == parts[0].dim(i), "concat: extents differ off the concat axis: " +
                                                 to_string(p.shape()) + " vs " +
                                                 to_string(parts[0].shape()));
      }
    }
    out_shape[axis] += p.dim(axis);
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[i];
  for (int i = axis + 1; i < r; ++i) inner *= out_shape[i];
  const std::int64_t out_row = out_shape[axis] * inner;
  auto fw = [parts, out_shape, outer, inner, out_row, axis] {
    Tensor out(out_shape);
    double* o = out.mutable_data();
    std::int64_t offset = 0;
    for (const auto& p : parts) {
      const std::int64_t row = p.dim(axis) * inner;
      for (std::int64_t b = 0; b < outer; ++b) {
        std::copy_n(p.data() + b * row, row, o + b * out_row + offset);
      }
      offset += row;
    }
    return out;
  };
  auto bw = [parts, outer, inner, out_row, axis](const Tensor& out) mutable {
    const double* g = out.grad().data();
    std::int64_t offset = 0;
    for (auto& p : parts) {
      const std::int64_t row = p.dim(axis) * inner;
      if (p.requires_grad()) {
        double* dp = p.mutable_grad().data();
        for (std::int64_t b = 0; b < outer; ++b) {
          for (std::int64_t j = 0; j < row; ++j) dp[b * row + j] += g[b * out_row + offset + j];
        }
      }
      offset += row;
    }
  };
  return record_op("concat", parts, fw(), {}, "", bw, fw);
}

Tensor slice(const Tensor& x, int axis, std::int64_t begin, std::int64_t end) {
  const int r = x.rank();
  if (axis < 0) axis += r;
  require(axis >= 0 && axis < r, "slice: axis out of range");
  require(0 <= begin && begin < end && end <= x.dim(axis),
          "slice [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range for " +
              to_string(x.shape()));
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[i];
  for (int i = axis + 1; i < r; ++i) inner *= out_shape[i];
  const std::int64_t in_row = x.dim(axis) * inner;
  const std::int64_t out_row = (end - begin) * inner;
  const std::int64_t offset = begin * inner;
  auto fw = [=] {
    Tensor out(out_shape);
    for (std::int64_t b = 0; b < outer; ++b) {
      std::copy_n(x.data() + b * in_row + offset, out_row, out.mutable_data() + b * out_row);
    }
    return out;
  };
  auto bw = [=](const Tensor& out) mutable {
    if (!x.requires_grad()) return;
    const double* g = out.grad().data();
    double* dx = x.mutable_grad().data();
    for (std::int64_t b = 0; b < outer; ++b) {
      for (std::int64_t j = 0; j < out_row; ++j) dx[b * in_row + offset + j] += g[b * out_row + j];
    }
  };
  return record_op("slice", {x}, fw(), {}, "", bw, fw);
}

Tensor expand_leading(const Tensor& x, std::int64_t n) {
  require(n >= 1, "expand_leading: count must be positive");
  Shape out_shape{n};
  out_shape.insert(out_shape.end(), x.shape().begin(), x.shape().end());
  auto fw = [x, n, out_shape] {
    Tensor out(out_shape);
    for (std::int64_t i = 0; i < n; ++i) {
      std::copy_n(x.data(), x.size(), out.mutable_data() + i * x.size());
    }
    return out;
  };
  auto bw = [x, n](const Tensor& out) mutable {
    if (!x.requires_grad()) return;
    const double* g = out.grad().data();
    double* dx = x.mutable_grad().data();
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < x.size(); ++j) dx[j] += g[i * x.size() + j];
    }
  };
  return record_op("expand", {x}, fw(), {}, "", bw, fw);
}

Tensor outer_add(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1),
          "outer_add expects [T x d] and [U x d]");
  const auto t_len = a.dim(0), u_len = b.dim(0), d = a.dim(1);
  auto fw = [=] {
    Tensor out({t_len, u_len, d});
    double* o = out.mutable_data();
    for (std::int64_t t = 0; t < t_len; ++t) {
      for (std::int64_t u = 0; u < u_len; ++u) {
        for (std::int64_t j = 0; j < d; ++j) {
          o[(t * u_len + u) * d + j] = a.at(t * d + j) + b.at(u * d + j);
        }
      }
    }
    return out;
  };
  auto bw = [=](const Tensor& out) mutable {
    const double* g = out.grad().data();
    if (a.requires_grad()) {
      double* da = a.mutable_grad().data();
      for (std::int64_t t = 0; t < t_len; ++t)
        for (std::int64_t u = 0; u < u_len; ++u)
          for (std::int64_t j = 0; j < d; ++j) da[t * d + j] += g[(t * u_len + u) * d + j];
    }
    if (b.requires_grad()) {
      double* db = b.mutable_grad().data();
      for (std::int64_t t = 0; t < t_len; ++t)
        for (std::int64_t u = 0; u < u_len; ++u)
          for (std::int64_t j = 0; j < d; ++j) db[u * d + j] += g[(t * u_len + u) * d + j];
    }
  };
  return record_op("outer_add", {a, b}, fw(), {0, t_len * u_len * d}, "", bw, fw);
}

Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> ids) {
  require(table.rank() == 2, "gather_rows expects a rank-2 table");
  const auto vocab = table.dim(0), d = table.dim(1);
  for (auto id : ids) {
    if (id < 0 || id >= vocab) {
      throw InputError("token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
  }
  require(!ids.empty(), "gather_rows with no ids");
  std::vector<std::int64_t> idv(ids.begin(), ids.end());
  const auto n = static_cast<std::int64_t>(idv.size());
  auto fw = [table, idv, n, d] {
    Tensor out({n, d});
    for (std::int64_t i = 0; i < n; ++i) {
      std::copy_n(table.data() + idv[i] * d, d, out.mutable_data() + i * d);
    }
    return out;
  };
  auto bw = [table, idv, n, d](const Tensor& out) mutable {
    if (!table.requires_grad()) return;
    const double* g = out.grad().data();
    double* dt = table.mutable_grad().data();
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < d; ++j) dt[idv[i] * d + j] += g[i * d + j];
    }
  };
  return record_op("gather_rows", {table}, fw(), {}, "", bw, fw);
}

// ---------------------------------------------------------------------------

namespace {

struct Video5 {
  std::int64_t b, t, h, w, c;
};

Video5 video_dims(const Tensor& x, const char* op) {
  require(x.rank() == 5, std::string(op) + " expects [B x T x H x W x C], got " +
                             to_string(x.shape()));
  return {x.dim(0), x.dim(1), x.dim(2), x.dim(3), x.dim(4)};
}

// Rows ordered (oy, ox); columns ordered (ky, kx, ci) to match the kernel layout.
void im2col(const double* frame, const Video5& v, int kh, int kw, int stride, std::int64_t oh,
            std::int64_t ow, double* cols) {
  const int ph = kh / 2, pw = kw / 2;
  const std::int64_t width = kh * kw * v.c;
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      double* row = cols + (oy * ow + ox) * width;
      for (int ky = 0; ky < kh; ++ky) {
        const std::int64_t iy = oy * stride + ky - ph;
        for (int kx = 0; kx < kw; ++kx) {
          const std::int64_t ix = ox * stride + kx - pw;
          double* dst = row + (ky * kw + kx) * v.c;
          if (iy < 0 || iy >= v.h || ix < 0 || ix >= v.w) {
            std::fill_n(dst, v.c, 0.0);
          } else {
            std::copy_n(frame + (iy * v.w + ix) * v.c, v.c, dst);
          }
        }
      }
    }
  }
}

void col2im(const double* cols, const Video5& v, int kh, int kw, int stride, std::int64_t oh,
            std::int64_t ow, double* frame_grad) {
  const int ph = kh / 2, pw = kw / 2;
  const std::int64_t width = kh * kw * v.c;
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      const double* row = cols + (oy * ow + ox) * width;
      for (int ky = 0; ky < kh; ++ky) {
        const std::int64_t iy = oy * stride + ky - ph;
        if (iy < 0 || iy >= v.h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const std::int64_t ix = ox * stride + kx - pw;
          if (ix < 0 || ix >= v.w) continue;
          const double* src = row + (ky * kw + kx) * v.c;
          double* dst = frame_grad + (iy * v.w + ix) * v.c;
          for (std::int64_t ci = 0; ci < v.c; ++ci) dst[ci] += src[ci];
        }
      }
    }
  }
}

}  // namespace

Tensor conv_spatial(const Tensor& x, const Tensor& kernel, int stride) {
  const auto v = video_dims(x, "conv_spatial");
  require(kernel.rank() == 5 && kernel.dim(0) == 1,
          "conv_spatial kernel must be [1 x kh x kw x C_in x C_out], got " +
              to_string(kernel.shape()));
  const int kh = static_cast<int>(kernel.dim(1)), kw = static_cast<int>(kernel.dim(2));
  require(kh % 2 == 1 && kw % 2 == 1, "conv_spatial needs odd kernel extents for same padding");
  require(kernel.dim(3) == v.c, "conv_spatial channel mismatch: input has " +
                                    std::to_string(v.c) + ", kernel expects " +
                                    std::to_string(kernel.dim(3)));
  require(stride >= 1, "conv_spatial stride must be positive");
  const auto cout = kernel.dim(4);
  const std::int64_t oh = (v.h + 2 * (kh / 2) - kh) / stride + 1;
  const std::int64_t ow = (v.w + 2 * (kw / 2) - kw) / stride + 1;
  const std::int64_t frames = v.b * v.t;
  const std::int64_t patch = kh * kw * v.c;
  const std::int64_t in_frame = v.h * v.w * v.c, out_frame = oh * ow * cout;
  auto fw = [=] {
    Tensor out({v.b, v.t, oh, ow, cout});
    std::vector<double> cols(static_cast<std::size_t>(oh * ow * patch));
    for (std::int64_t f = 0; f < frames; ++f) {
      im2col(x.data() + f * in_frame, v, kh, kw, stride, oh, ow, cols.data());
      gemm(cols.data(), kernel.data(), out.mutable_data() + f * out_frame, oh * ow, patch, cout,
           false, false, false);
    }
    return out;
  };
  auto bw = [=](const Tensor& out) mutable {
    std::vector<double> cols(static_cast<std::size_t>(oh * ow * patch));
    const double* g = out.grad().data();
    for (std::int64_t f = 0; f < frames; ++f) {
      const double* gf = g + f * out_frame;
      if (kernel.requires_grad()) {
        im2col(x.data() + f * in_frame, v, kh, kw, stride, oh, ow, cols.data());
        gemm(cols.data(), gf, kernel.mutable_grad().data(), patch, oh * ow, cout, true, false,
             true);
      }
      if (x.requires_grad()) {
        gemm(gf, kernel.data(), cols.data(), oh * ow, cout, patch, false, true, false);
        col2im(cols.data(), v, kh, kw, stride, oh, ow, x.mutable_grad().data() + f * in_frame);
      }
    }
  };
  const auto ma = frames * oh * ow * cout * patch;
  std::ostringstream meta;
  meta << "kernel=[1," << kh << ',' << kw << ',' << v.c << ',' << cout << "] stride=" << stride
       << " pad=same";
  return record_op("conv_spatial", {x, kernel}, fw(), {ma, kFlopsPerMultAdd * ma}, meta.str(),
                   bw, fw);
}

Tensor conv_temporal(const Tensor& x, const Tensor& kernel, int stride) {
  const auto v = video_dims(x, "conv_temporal");
  require(kernel.rank() == 5 && kernel.dim(1) == 1 && kernel.dim(2) == 1,
          "conv_temporal kernel must be [kt x 1 x 1 x C_in x C_out], got " +
              to_string(kernel.shape()));
  const int kt = static_cast<int>(kernel.dim(0));
  require(kt % 2 == 1, "conv_temporal needs an odd kernel extent for same padding");
  require(kernel.dim(3) == v.c, "conv_temporal channel mismatch: input has " +
                                    std::to_string(v.c) + ", kernel expects " +
                                    std::to_string(kernel.dim(3)));
  require(stride >= 1, "conv_temporal stride must be positive");
  const auto cout = kernel.dim(4);
  const int pad = kt / 2;
  const std::int64_t ot = (v.t + 2 * pad - kt) / stride + 1;
  const std::int64_t pixels = v.h * v.w;
  const std::int64_t in_frame = pixels * v.c, out_frame = pixels * cout;
  const std::int64_t tap = v.c * cout;
  auto fw = [=] {
    Tensor out({v.b, ot, v.h, v.w, cout});
    for (std::int64_t b = 0; b < v.b; ++b) {
      for (std::int64_t t = 0; t < ot; ++t) {
        double* o = out.mutable_data() + (b * ot + t) * out_frame;
        bool first = true;
        for (int dt = 0; dt < kt; ++dt) {
          const std::int64_t src = t * stride + dt - pad;
          if (src < 0 || src >= v.t) continue;
          gemm(x.data() + (b * v.t + src) * in_frame, kernel.data() + dt * tap, o, pixels, v.c,
               cout, false, false, !first);
          first = false;
        }
        if (first) std::fill_n(o, out_frame, 0.0);
      }
    }
    return out;
  };
  auto bw = [=](const Tensor& out) mutable {
    const double* g = out.grad().data();
    for (std::int64_t b = 0; b < v.b; ++b) {
      for (std::int64_t t = 0; t < ot; ++t) {
        const double* gf = g + (b * ot + t) * out_frame;
        for (int dt = 0; dt < kt; ++dt) {
          const std::int64_t src = t * stride + dt - pad;
          if (src < 0 || src >= v.t) continue;
          if (kernel.requires_grad()) {
            gemm(x.data() + (b * v.t + src) * in_frame, gf,
                 kernel.mutable_grad().data() + dt * tap, v.c, pixels, cout, true, false, true);
          }
          if (x.requires_grad()) {
            gemm(gf, kernel.data() + dt * tap, x.mutable_grad().data() + (b * v.t + src) * in_frame,
                 pixels, cout, v.c, false, true, true);
          }
        }
      }
    }
  };
  // Dense convention: padding taps are counted like the spatial convs.
  const auto ma = v.b * ot * kt * pixels * v.c * cout;
  std::ostringstream meta;
  meta << "kernel=[" << kt << ",1,1," << v.c << ',' << cout << "] stride=" << stride
       << " pad=same";
  return record_op("conv_temporal", {x, kernel}, fw(), {ma, kFlopsPerMultAdd * ma}, meta.str(),
                   bw, fw);
}

Tensor conv3d(const Tensor& x, const Tensor& kernel, int stride) {
  const auto v = video_dims(x, "conv3d");
  require(kernel.rank() == 5, "conv3d kernel must be [kt x kh x kw x C_in x C_out], got " +
                                  to_string(kernel.shape()));
  const int kt = static_cast<int>(kernel.dim(0));
  const int kh = static_cast<int>(kernel.dim(1)), kw = static_cast<int>(kernel.dim(2));
  require(kt % 2 == 1 && kh % 2 == 1 && kw % 2 == 1,
          "conv3d needs odd kernel extents for same padding");
  require(kernel.dim(3) == v.c, "conv3d channel mismatch: input has " + std::to_string(v.c) +
                                    ", kernel expects " + std::to_string(kernel.dim(3)));
  require(stride >= 1, "conv3d stride must be positive");
  const auto cout = kernel.dim(4);
  const int pt = kt / 2;
  const std::int64_t oh = (v.h + 2 * (kh / 2) - kh) / stride + 1;
  const std::int64_t ow = (v.w + 2 * (kw / 2) - kw) / stride + 1;
  const std::int64_t patch = kh * kw * v.c;
  const std::int64_t in_frame = v.h * v.w * v.c, out_frame = oh * ow * cout;
  const std::int64_t slab = patch * cout;
  auto fw = [=] {
    Tensor out({v.b, v.t, oh, ow, cout});
    std::vector<double> cols(static_cast<std::size_t>(oh * ow * patch));
    for (std::int64_t b = 0; b < v.b; ++b) {
      for (std::int64_t src = 0; src < v.t; ++src) {
        im2col(x.data() + (b * v.t + src) * in_frame, v, kh, kw, stride, oh, ow, cols.data());
        for (int dt = 0; dt < kt; ++dt) {
          const std::int64_t t = src - dt + pt;
          if (t < 0 || t >= v.t) continue;
          gemm(cols.data(), kernel.data() + dt * slab, out.mutable_data() + (b * v.t + t) * out_frame,
               oh * ow, patch, cout, false, false, true);
        }
      }
    }
    return out;
  };
  auto bw = [=](const Tensor& out) mutable {
    std::vector<double> cols(static_cast<std::size_t>(oh * ow * patch));
    const double* g = out.grad().data();
    for (std::int64_t b = 0; b < v.b; ++b) {
      for (std::int64_t src = 0; src < v.t; ++src) {
        const double* frame = x.data() + (b * v.t + src) * in_frame;
        if (kernel.requires_grad()) im2col(frame, v, kh, kw, stride, oh, ow, cols.data());
        for (int dt = 0; dt < kt; ++dt) {
          const std::int64_t t = src - dt + pt;
          if (t < 0 || t >= v.t) continue;
          const double* gf = g + (b * v.t + t) * out_frame;
          if (kernel.requires_grad()) {
            gemm(cols.data(), gf, kernel.mutable_grad().data() + dt * slab, patch, oh * ow, cout,
                 true, false, true);
          }
        }
        if (x.requires_grad()) {
          std::vector<double> gcols(static_cast<std::size_t>(oh * ow * patch), 0.0);
          for (int dt = 0; dt < kt; ++dt) {
            const std::int64_t t = src - dt + pt;
            if (t < 0 || t >= v.t) continue;
            gemm(g + (b * v.t + t) * out_frame, kernel.data() + dt * slab, gcols.data(), oh * ow,
                 cout, patch, false, true, true);
          }
          col2im(gcols.data(), v, kh, kw, stride, oh, ow,
                 x.mutable_grad().data() + (b * v.t + src) * in_frame);
        }
      }
    }
  };
  const auto ma = v.b * v.t * oh * ow * cout * kt * patch;
  std::ostringstream meta;
  meta << "kernel=[" << kt << ',' << kh << ',' << kw << ',' << v.c << ',' << cout
       << "] stride=" << stride << " pad=same";
  return record_op("conv3d", {x, kernel}, fw(), {ma, kFlopsPerMultAdd * ma}, meta.str(), bw, fw);
}

Tensor maxpool_spatial(const Tensor& x, int window, int stride) {
  const auto v = video_dims(x, "maxpool_spatial");
  require(window >= 1 && stride >= 1, "maxpool_spatial: window and stride must be positive");
  if (v.h < window || v.w < window || (v.h - window) % stride != 0 ||
      (v.w - window) % stride != 0) {
    throw DimensionError("maxpool_spatial: extent " + std::to_string(v.h) + "x" +
                         std::to_string(v.w) + " does not tile with window " +
                         std::to_string(window) + " stride " + std::to_string(stride));
  }
  const std::int64_t oh = (v.h - window) / stride + 1, ow = (v.w - window) / stride + 1;
  const std::int64_t frames = v.b * v.t;
  auto argmax_of = [=](std::int64_t f, std::int64_t oy, std::int64_t ox, std::int64_t c) {
    const double* base = x.data() + f * v.h * v.w * v.c;
    std::int64_t best = ((oy * stride) * v.w + ox * stride) * v.c + c;
    for (int ky = 0; ky < window; ++ky) {
      for (int kx = 0; kx < window; ++kx) {
        const std::int64_t i = ((oy * stride + ky) * v.w + ox * stride + kx) * v.c + c;
        if (base[i] > base[best]) best = i;
      }
    }
    return f * v.h * v.w * v.c + best;
  };
  auto fw = [=] {
    Tensor out({v.b, v.t, oh, ow, v.c});
    double* o = out.mutable_data();
    std::int64_t k = 0;
    for (std::int64_t f = 0; f < frames; ++f)
      for (std::int64_t oy = 0; oy < oh; ++oy)
        for (std::int64_t ox = 0; ox < ow; ++ox)
          for (std::int64_t c = 0; c < v.c; ++c) o[k++] = x.at(argmax_of(f, oy, ox, c));
    return out;
  };
  auto bw = [=](const Tensor& out) mutable {
    if (!x.requires_grad()) return;
    const double* g = out.grad().data();
    double* dx = x.mutable_grad().data();
    std::int64_t k = 0;
    for (std::int64_t f = 0; f < frames; ++f)
      for (std::int64_t oy = 0; oy < oh; ++oy)
        for (std::int64_t ox = 0; ox < ow; ++ox)
          for (std::int64_t c = 0; c < v.c; ++c) dx[argmax_of(f, oy, ox, c)] += g[k++];
  };
  const auto in_elems = frames * oh * ow * v.c * window * window;
  return record_op("maxpool_spatial", {x}, fw(), {0, in_elems},
                   "window=" + std::to_string(window) + " stride=" + std::to_string(stride), bw,
                   fw);
}

Tensor global_avg_pool_spatial(const Tensor& x) {
  const auto v = video_dims(x, "global_avg_pool_spatial");
  const std::int64_t pixels = v.h * v.w;
  const double inv = 1.0 / static_cast<double>(pixels);
  auto fw = [=] {
    Tensor out({v.b, v.t, v.c});
    double* o = out.mutable_data();
    for (std::int64_t f = 0; f < v.b * v.t; ++f) {
      const double* src = x.data() + f * pixels * v.c;
      for (std::int64_t p = 0; p < pixels; ++p)
        for (std::int64_t c = 0; c < v.c; ++c) o[f * v.c + c] += src[p * v.c + c];
      for (std::int64_t c = 0; c < v.c; ++c) o[f * v.c + c] *= inv;
    }
    return out;
  };
  auto bw = [=](const Tensor& out) mutable {
    if (!x.requires_grad()) return;
    const double* g = out.grad().data();
    double* dx = x.mutable_grad().data();
    for (std::int64_t f = 0; f < v.b * v.t; ++f)
      for (std::int64_t p = 0; p < pixels; ++p)
        for (std::int64_t c = 0; c < v.c; ++c) dx[(f * pixels + p) * v.c + c] += g[f * v.c + c] * inv;
  };
  return record_op("avg_pool", {x}, fw(), {0, x.size()}, "", bw, fw);
}

// ---------------------------------------------------------------------------

LstmState lstm_cell(const Tensor& x, const LstmState& state, const Tensor& wx, const Tensor& wh,
                    const Tensor& b) {
  const auto hidden = wh.dim(0);
  require(wx.dim(1) == 4 * hidden && wh.dim(1) == 4 * hidden,
          "lstm_cell: weights must have 4*H columns");
  require(state.h.dim(-1) == hidden && state.c.dim(-1) == hidden, "lstm_cell: state width");
  Tensor gates = add(linear(x, wx, b), matmul(state.h, wh));
  Tensor i = sigmoid(slice(gates, -1, 0, hidden));
  Tensor f = sigmoid(slice(gates, -1, hidden, 2 * hidden));
  Tensor g = tanh(slice(gates, -1, 2 * hidden, 3 * hidden));
  Tensor o = sigmoid(slice(gates, -1, 3 * hidden, 4 * hidden));
  Tensor c = add(mul(f, state.c), mul(i, g));
  Tensor h = mul(o, tanh(c));
  return {h, c};
}

Tensor multi_head_attention(const Tensor& x, const AttentionWeights& w, int heads) {
  require(x.rank() >= 2, "attention input must be [..., S, d]");
  const auto d = x.dim(-1), s = x.dim(-2);
  if (heads <= 0 || d % heads != 0) {
    throw ConfigError("attention width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const auto n = x.size() / (s * d);
  const auto dh = d / heads;
  auto split = [&](const Tensor& t) {
    return reshape(permute(reshape(t, {n, s, heads, dh}), {0, 2, 1, 3}), {n * heads, s, dh});
  };
  Tensor q = split(linear(x, w.wq, w.bq));
  Tensor k = split(linear(x, w.wk, w.bk));
  Tensor v = split(linear(x, w.wv, w.bv));
  Tensor p = softmax(scale(bmm(q, k, true), 1.0 / std::sqrt(static_cast<double>(dh))));
  Tensor ctx = bmm(p, v);
  ctx = reshape(permute(reshape(ctx, {n, heads, s, dh}), {0, 2, 1, 3}), x.shape());
  return linear(ctx, w.wo, w.bo);
}

}  // namespace avvit
