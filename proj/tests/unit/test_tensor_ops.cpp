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

#include <cmath>
#include <numeric>

#include "avvit/error.hpp"
#include "avvit/graph.hpp"
#include "avvit/nn.hpp"
#include "avvit/ops.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace avvit;
using avvit::testing::grad_check;
using avvit::testing::max_abs_diff;
using avvit::testing::random_tensor;
using avvit::testing::weighted_sum;

namespace {

// Direct loops, written independently of the im2col/GEMM paths.
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::int64_t p = 0; p < k; ++p) s += a.at(i * k + p) * b.at(p * n + j);
      out.mutable_values()[i * n + j] = s;
    }
  return out;
}

// Generic same-padded 3-D convolution with a [kt, kh, kw, ci, co] kernel.
Tensor conv3d_oracle(const Tensor& x, const Tensor& k, int st, int sh) {
  const auto B = x.dim(0), T = x.dim(1), H = x.dim(2), W = x.dim(3), C = x.dim(4);
  const auto kt = k.dim(0), kh = k.dim(1), kw = k.dim(2), co = k.dim(4);
  const auto OT = (T + 2 * (kt / 2) - kt) / st + 1;
  const auto OH = (H + 2 * (kh / 2) - kh) / sh + 1;
  const auto OW = (W + 2 * (kw / 2) - kw) / sh + 1;
  Tensor out({B, OT, OH, OW, co});
  auto xi = [&](auto b, auto t, auto h, auto w, auto c) {
    return x.at((((b * T + t) * H + h) * W + w) * C + c);
  };
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < OT; ++t)
      for (std::int64_t h = 0; h < OH; ++h)
        for (std::int64_t w = 0; w < OW; ++w)
          for (std::int64_t o = 0; o < co; ++o) {
            double s = 0.0;
            for (std::int64_t dt = 0; dt < kt; ++dt)
              for (std::int64_t dy = 0; dy < kh; ++dy)
                for (std::int64_t dx = 0; dx < kw; ++dx)
                  for (std::int64_t c = 0; c < C; ++c) {
                    const auto tt = t * st + dt - kt / 2;
                    const auto yy = h * sh + dy - kh / 2;
                    const auto xx = w * sh + dx - kw / 2;
                    if (tt < 0 || tt >= T || yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                    s += xi(b, tt, yy, xx, c) *
                         k.at((((dt * kh + dy) * kw + dx) * C + c) * co + o);
                  }
            out.mutable_values()[(((b * OT + t) * OH + h) * OW + w) * co + o] = s;
          }
  return out;
}

}  // namespace

TEST_CASE("matmul: identity, hand example, triple-loop oracle") {
  Rng rng(1);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(matmul(eye, b).bit_equal(b));

  Tensor lhs({2, 2}, {1, 2, 3, 4});
  Tensor rhs({2, 1}, {0, 1});
  Tensor out = matmul(lhs, rhs);
  CHECK(out.shape() == Shape{2, 1});
  CHECK(out.at(0) == 2.0);
  CHECK(out.at(1) == 4.0);

  Tensor a = random_tensor({5, 7}, rng);
  Tensor c = random_tensor({7, 3}, rng);
  CHECK(max_abs_diff(matmul(a, c).values(), matmul_oracle(a, c).values()) < 1e-12);

  CHECK_THROWS_AS(matmul(a, a), DimensionError);
}

TEST_CASE("matmul records 2mkn flops in the active graph") {
  Graph g;
  GraphScope scope(g);
  matmul(Tensor::full({2, 2}, 1.0), Tensor::full({2, 2}, 1.0));
  REQUIRE(g.ops().size() == 1);
  CHECK(g.ops()[0].flops == 16);
  CHECK(g.ops()[0].mult_adds == 8);
  CHECK(g.costs().flops == 16);
}

TEST_CASE("linear 240 -> 512 has 123392 parameters") {
  ParamStore ps;
  Rng rng(0);
  Linear layer(ps, "proj", 240, 512, rng);
  CHECK(ps.total() == 123392);
}

TEST_CASE("conv_spatial: delta kernel, box filter, nested-loop oracle") {
  Rng rng(2);
  Tensor x = random_tensor({2, 3, 5, 6, 2}, rng);
  Tensor delta({1, 3, 3, 2, 2});
  for (int c = 0; c < 2; ++c) delta.mutable_values()[((1 * 3 + 1) * 2 + c) * 2 + c] = 1.0;
  CHECK(max_abs_diff(conv_spatial(x, delta).values(), x.values()) == 0.0);

  Tensor ones_in = Tensor::full({1, 1, 5, 5, 1}, 1.0);
  Tensor box = Tensor::full({1, 3, 3, 1, 1}, 1.0);
  Tensor y = conv_spatial(ones_in, box);
  for (int h = 1; h < 4; ++h)
    for (int w = 1; w < 4; ++w) CHECK(y.at(h * 5 + w) == 9.0);
  CHECK(y.at(0) == 4.0);  // corner sees a 2x2 neighbourhood

  Tensor k = random_tensor({1, 3, 3, 2, 4}, rng);
  CHECK(max_abs_diff(conv_spatial(x, k).values(), conv3d_oracle(x, k, 1, 1).values()) < 1e-12);
  CHECK(max_abs_diff(conv_spatial(x, k, 2).values(), conv3d_oracle(x, k, 1, 2).values()) <
        1e-12);

  CHECK_THROWS_AS(conv_spatial(x, random_tensor({1, 3, 3, 3, 4}, rng)), DimensionError);
}

TEST_CASE("conv_temporal: delta kernel, moving average, nested-loop oracle") {
  Rng rng(3);
  Tensor x = random_tensor({2, 5, 3, 2, 2}, rng);
  Tensor delta({3, 1, 1, 2, 2});
  for (int c = 0; c < 2; ++c) delta.mutable_values()[(1 * 2 + c) * 2 + c] = 1.0;
  CHECK(max_abs_diff(conv_temporal(x, delta).values(), x.values()) == 0.0);

  Tensor ramp({1, 4, 1, 1, 1}, {0, 1, 2, 3});
  Tensor avg = Tensor::full({3, 1, 1, 1, 1}, 1.0 / 3.0);
  Tensor y = conv_temporal(ramp, avg);
  CHECK(y.at(1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(y.at(2) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(y.at(0) == doctest::Approx(1.0 / 3.0));  // zero padding at the edge

  Tensor k = random_tensor({3, 1, 1, 2, 3}, rng);
  CHECK(max_abs_diff(conv_temporal(x, k).values(), conv3d_oracle(x, k, 1, 1).values()) < 1e-12);
  CHECK(max_abs_diff(conv_temporal(x, k, 2).values(), conv3d_oracle(x, k, 2, 1).values()) <
        1e-12);
  CHECK_THROWS_AS(conv_temporal(x, random_tensor({3, 1, 1, 5, 3}, rng)), DimensionError);
}

TEST_CASE("conv3d: nested-loop oracle, decomposition cost") {
  Rng rng(31);
  Tensor x = random_tensor({2, 5, 6, 4, 3}, rng);
  Tensor k = random_tensor({3, 3, 3, 3, 4}, rng);
  CHECK(max_abs_diff(conv3d(x, k).values(), conv3d_oracle(x, k, 1, 1).values()) < 1e-12);
  CHECK(max_abs_diff(conv3d(x, k, 2).values(), conv3d_oracle(x, k, 1, 2).values()) < 1e-12);
  CHECK_THROWS_AS(conv3d(x, random_tensor({2, 3, 3, 3, 4}, rng)), DimensionError);

  // At equal width C, [1,3,3] + [3,1,1] costs (9C + 3C) / 27C of a [3,3,3] layer.
  const std::int64_t c = 4;
  Tensor v = random_tensor({1, 4, 8, 8, c}, rng);
  Graph full(Graph::Mode::kCountOnly);
  {
    GraphScope scope(full);
    conv3d(v, random_tensor({3, 3, 3, c, c}, rng));
  }
  Graph split(Graph::Mode::kCountOnly);
  {
    GraphScope scope(split);
    conv_temporal(conv_spatial(v, random_tensor({1, 3, 3, c, c}, rng)),
                  random_tensor({3, 1, 1, c, c}, rng));
  }
  const auto full_ma = full.costs().mult_adds;
  const auto split_ma = split.costs().mult_adds;
  CHECK(full_ma == 4 * 8 * 8 * 27 * c * c);
  CHECK(split_ma * 27 == full_ma * 12);
}

TEST_CASE("maxpool_spatial: constant, 2x2 example, windowed oracle, odd extent") {
  Tensor c = Tensor::full({1, 2, 4, 4, 3}, 0.7);
  Tensor pc = maxpool_spatial(c);
  CHECK(pc.shape() == Shape{1, 2, 2, 2, 3});
  for (double v : pc.values()) CHECK(v == 0.7);

  Tensor small({1, 1, 2, 2, 1}, {1, 2, 3, 4});
  CHECK(maxpool_spatial(small).item() == 4.0);

  Rng rng(4);
  Tensor x = random_tensor({1, 1, 8, 8, 2}, rng);
  Tensor y = maxpool_spatial(x);
  for (int oy = 0; oy < 4; ++oy)
    for (int ox = 0; ox < 4; ++ox)
      for (int ch = 0; ch < 2; ++ch) {
        double m = -1e300;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            m = std::max(m, x.at(((oy * 2 + dy) * 8 + ox * 2 + dx) * 2 + ch));
        CHECK(y.at((oy * 4 + ox) * 2 + ch) == m);
      }

  CHECK_THROWS_AS(maxpool_spatial(Tensor::zeros({1, 1, 5, 4, 1})), DimensionError);
  CHECK_THROWS_AS(maxpool_spatial(Tensor::zeros({1, 1, 4, 7, 1})), DimensionError);
}

TEST_CASE("softmax: uniform logits, rows sum to one, large magnitudes") {
  Tensor u = softmax(Tensor::full({1, 4}, 3.0));
  for (double v : u.values()) CHECK(v == 0.25);

  Tensor big({2, 3}, {1e4, -1e4, 0.0, -1e4, -1e4, -1e4});
  Tensor p = softmax(big);
  CHECK(p.at(0) == 1.0);
  CHECK(p.at(3) == doctest::Approx(1.0 / 3.0));
  Tensor lp = log_softmax(big);
  CHECK(lp.at(0) == 0.0);
  CHECK(std::isfinite(lp.at(1)));

  Rng rng(5);
  Tensor r = softmax(random_tensor({6, 5}, rng, 10.0));
  for (int i = 0; i < 6; ++i) {
    double s = 0.0;
    for (int j = 0; j < 5; ++j) s += r.at(i * 5 + j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("layer_norm: zero mean and unit variance before the affine") {
  Rng rng(6);
  for (int width : {2, 7, 64}) {
    Tensor x = random_tensor({3, width}, rng, 5.0);
    Tensor y = layer_norm(x, Tensor(), Tensor(), 0.0);
    for (int r = 0; r < 3; ++r) {
      double mu = 0.0, var = 0.0;
      for (int j = 0; j < width; ++j) mu += y.at(r * width + j);
      mu /= width;
      for (int j = 0; j < width; ++j) var += (y.at(r * width + j) - mu) * (y.at(r * width + j) - mu);
      var /= width;
      CHECK(std::abs(mu) < 1e-12);
      CHECK(std::abs(var - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("lstm_cell with zero weights keeps a zero state") {
  Tensor x = Tensor::full({1, 3}, 0.4);
  LstmState s{Tensor::zeros({1, 2}), Tensor::zeros({1, 2})};
  LstmState out = lstm_cell(x, s, Tensor::zeros({3, 8}), Tensor::zeros({2, 8}), Tensor::zeros({8}));
  for (double v : out.h.values()) CHECK(v == 0.0);
  for (double v : out.c.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(lstm_cell(x, s, Tensor::zeros({3, 6}), Tensor::zeros({2, 8}), Tensor::zeros({8})),
                  DimensionError);
}

namespace {

AttentionWeights random_attention(std::int64_t d, Rng& rng) {
  AttentionWeights w;
  w.wq = random_tensor({d, d}, rng, 0.5);
  w.bq = random_tensor({d}, rng, 0.1);
  w.wk = random_tensor({d, d}, rng, 0.5);
  w.bk = random_tensor({d}, rng, 0.1);
  w.wv = random_tensor({d, d}, rng, 0.5);
  w.bv = random_tensor({d}, rng, 0.1);
  w.wo = random_tensor({d, d}, rng, 0.5);
  w.bo = random_tensor({d}, rng, 0.1);
  return w;
}

}  // namespace

TEST_CASE("multi_head_attention: single token reduces to the value path") {
  Rng rng(7);
  const auto w = random_attention(4, rng);
  Tensor x = random_tensor({1, 4}, rng);
  Tensor y = multi_head_attention(x, w, 2);
  Tensor expect = linear(linear(x, w.wv, w.bv), w.wo, w.bo);
  CHECK(max_abs_diff(y.values(), expect.values()) < 1e-12);
}

TEST_CASE("multi_head_attention: permuting tokens permutes outputs") {
  Rng rng(8);
  const auto w = random_attention(6, rng);
  Tensor x = random_tensor({5, 6}, rng);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  std::vector<Tensor> rows;
  for (int p : perm) rows.push_back(slice(x, 0, p, p + 1));
  Tensor xp = concat(rows, 0);
  Tensor y = multi_head_attention(x, w, 3);
  Tensor yp = multi_head_attention(xp, w, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 6; ++j) CHECK(yp.at(i * 6 + j) == doctest::Approx(y.at(perm[i] * 6 + j)).epsilon(1e-12));
  CHECK_THROWS_AS(multi_head_attention(x, w, 4), ConfigError);
}

TEST_CASE("multi_head_attention: two tokens, one head, explicit formula") {
  Rng rng(9);
  const auto w = random_attention(2, rng);
  Tensor x = random_tensor({2, 2}, rng);
  auto affine = [](const Tensor& wt, const Tensor& b, double x0, double x1, int j) {
    return x0 * wt.at(0 * 2 + j) + x1 * wt.at(1 * 2 + j) + b.at(j);
  };
  double q[2][2], k[2][2], v[2][2];
  for (int t = 0; t < 2; ++t)
    for (int j = 0; j < 2; ++j) {
      q[t][j] = affine(w.wq, w.bq, x.at(t * 2), x.at(t * 2 + 1), j);
      k[t][j] = affine(w.wk, w.bk, x.at(t * 2), x.at(t * 2 + 1), j);
      v[t][j] = affine(w.wv, w.bv, x.at(t * 2), x.at(t * 2 + 1), j);
    }
  Tensor y = multi_head_attention(x, w, 1);
  for (int t = 0; t < 2; ++t) {
    double s0 = (q[t][0] * k[0][0] + q[t][1] * k[0][1]) / std::sqrt(2.0);
    double s1 = (q[t][0] * k[1][0] + q[t][1] * k[1][1]) / std::sqrt(2.0);
    const double p0 = 1.0 / (1.0 + std::exp(s1 - s0));
    const double p1 = 1.0 - p0;
    const double c0 = p0 * v[0][0] + p1 * v[1][0];
    const double c1 = p0 * v[0][1] + p1 * v[1][1];
    for (int j = 0; j < 2; ++j) {
      const double expect = affine(w.wo, w.bo, c0, c1, j);
      CHECK(std::abs(y.at(t * 2 + j) - expect) < 1e-12);
    }
  }
}

TEST_CASE("backward: sum and sum of squares") {
  Rng rng(10);
  Tensor x = random_tensor({3, 4}, rng).set_requires_grad(true);
  {
    Graph g;
    GraphScope scope(g);
    backward(g, sum(x));
  }
  for (double v : x.grad()) CHECK(v == 1.0);
  x.clear_grad();
  {
    Graph g;
    GraphScope scope(g);
    backward(g, sum(mul(x, x)));
  }
  for (int i = 0; i < 12; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * x.at(i)));
}

TEST_CASE("backward: fan-out gradients accumulate additively") {
  Tensor x = Tensor({2}, {1.5, -2.0}).set_requires_grad(true);
  Graph g;
  GraphScope scope(g);
  Tensor y = add(x, x);               // 2x
  Tensor z = add(mul(y, x), scale(x, 3.0));  // 2x^2 + 3x
  backward(g, sum(z));
  CHECK(x.grad()[0] == doctest::Approx(4 * 1.5 + 3));
  CHECK(x.grad()[1] == doctest::Approx(4 * -2.0 + 3));
  CHECK(g.last_backward_visits() == static_cast<std::int64_t>(g.ops().size()));
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor x = Tensor::full({2, 2}, 1.0).set_requires_grad(true);
  Graph g;
  GraphScope scope(g);
  Tensor y = scale(x, 2.0);
  CHECK_THROWS_AS(backward(g, y), ContractError);
}

TEST_CASE("graph replay reproduces outputs bit for bit") {
  Rng rng(11);
  const auto w = random_attention(8, rng);
  Tensor x = random_tensor({2, 5, 8}, rng);
  Graph g;
  {
    GraphScope scope(g);
    Tensor y = layer_norm(gelu(multi_head_attention(x, w, 2)), Tensor(), Tensor(), 1e-6);
    sum(y);
  }
  CHECK(g.ops().size() > 10);
  CHECK(g.replay_matches());
}

TEST_CASE("forward ops are deterministic") {
  auto run = [] {
    Rng rng(12);
    Tensor x = random_tensor({1, 3, 8, 8, 3}, rng);
    Tensor k = random_tensor({1, 3, 3, 3, 4}, rng);
    Tensor kt = random_tensor({3, 1, 1, 4, 4}, rng);
    return global_avg_pool_spatial(maxpool_spatial(relu(conv_temporal(conv_spatial(x, k), kt))));
  };
  CHECK(run().bit_equal(run()));
}

TEST_CASE("non-finite outputs raise NumericError") {
  Tensor x({2}, {1.0, 1e308});
  CHECK_THROWS_AS(scale(x, 10.0), NumericError);
}

// ---------------------------------------------------------------------------
// Finite-difference checks, three random shapes per op.

namespace {

void expect_grad_ok(const std::function<Tensor(std::vector<Tensor>&)>& f,
                    std::vector<Tensor> inputs, const char* what) {
  const auto res = grad_check(f, std::move(inputs));
  INFO(what << " worst " << res.worst << " rel " << res.max_rel_error);
  CHECK(res.max_rel_error < 1e-5);
}

}  // namespace

TEST_CASE("gradient check: elementwise, reductions and movement ops") {
  Rng rng(20);
  const std::vector<Shape> shapes{{3}, {2, 5}, {2, 3, 4}};
  for (const auto& s : shapes) {
    auto a = random_tensor(s, rng);
    auto b = random_tensor(s, rng);
    expect_grad_ok([](auto& in) { return weighted_sum(add(in[0], in[1])); }, {a, b}, "add");
    expect_grad_ok([](auto& in) { return weighted_sum(sub(in[0], in[1])); }, {a, b}, "sub");
    expect_grad_ok([](auto& in) { return weighted_sum(mul(in[0], in[1])); }, {a, b}, "mul");
    expect_grad_ok([](auto& in) { return weighted_sum(scale(in[0], -1.7)); }, {a}, "scale");
    expect_grad_ok([](auto& in) { return weighted_sum(gelu(in[0])); }, {a}, "gelu");
    expect_grad_ok([](auto& in) { return weighted_sum(tanh(in[0])); }, {a}, "tanh");
    expect_grad_ok([](auto& in) { return weighted_sum(sigmoid(in[0])); }, {a}, "sigmoid");
    expect_grad_ok([](auto& in) { return weighted_sum(softmax(in[0])); }, {a}, "softmax");
    expect_grad_ok([](auto& in) { return weighted_sum(log_softmax(in[0])); }, {a}, "log_softmax");
    expect_grad_ok([](auto& in) { return mean(mul(in[0], in[0])); }, {a}, "mean");
    // relu: keep inputs away from the kink.
    auto r = random_tensor(s, rng);
    for (double& v : r.mutable_values()) v += (v >= 0 ? 0.1 : -0.1);
    expect_grad_ok([](auto& in) { return weighted_sum(relu(in[0])); }, {r}, "relu");
    auto tail = random_tensor({s.back()}, rng);
    expect_grad_ok([](auto& in) { return weighted_sum(add(in[0], in[1])); }, {a, tail},
                   "broadcast add");
    expect_grad_ok([](auto& in) { return weighted_sum(expand_leading(in[0], 3)); }, {a}, "expand");
  }
  for (const auto& s : std::vector<Shape>{{2, 3, 4}, {4, 2, 3}, {3, 3, 2}}) {
    auto a = random_tensor(s, rng);
    expect_grad_ok([](auto& in) { return weighted_sum(permute(in[0], {2, 0, 1})); }, {a}, "permute");
    expect_grad_ok([](auto& in) { return weighted_sum(slice(in[0], 1, 1, in[0].dim(1))); }, {a},
                   "slice");
    expect_grad_ok(
        [](auto& in) { return weighted_sum(concat({in[0], scale(in[0], 2.0)}, 1)); }, {a},
        "concat");
    expect_grad_ok([](auto& in) { return weighted_sum(reshape(in[0], {numel(in[0].shape())})); },
                   {a}, "reshape");
  }
}

TEST_CASE("gradient check: matmul family and layer norm") {
  Rng rng(21);
  for (auto [m, k, n] : std::vector<std::array<int, 3>>{{1, 1, 1}, {3, 4, 2}, {5, 2, 6}}) {
    auto a = random_tensor({m, k}, rng);
    auto b = random_tensor({k, n}, rng);
    auto bias = random_tensor({n}, rng);
    expect_grad_ok([](auto& in) { return weighted_sum(matmul(in[0], in[1])); }, {a, b}, "matmul");
    expect_grad_ok([](auto& in) { return weighted_sum(linear(in[0], in[1], in[2])); },
                   {a, b, bias}, "linear");
    auto a3 = random_tensor({2, m, k}, rng);
    auto b3 = random_tensor({2, k, n}, rng);
    auto bt = random_tensor({2, n, k}, rng);
    expect_grad_ok([](auto& in) { return weighted_sum(bmm(in[0], in[1])); }, {a3, b3}, "bmm");
    expect_grad_ok([](auto& in) { return weighted_sum(bmm(in[0], in[1], true)); }, {a3, bt},
                   "bmm^T");
    auto x = random_tensor({m, k + 1}, rng);
    auto g = random_tensor({k + 1}, rng);
    auto be = random_tensor({k + 1}, rng);
    expect_grad_ok([](auto& in) { return weighted_sum(layer_norm(in[0], in[1], in[2], 1e-6)); },
                   {x, g, be}, "layer_norm");
    auto ta = random_tensor({m, 3}, rng);
    auto tb = random_tensor({n, 3}, rng);
    expect_grad_ok([](auto& in) { return weighted_sum(outer_add(in[0], in[1])); }, {ta, tb},
                   "outer_add");
  }
  Tensor table = random_tensor({5, 3}, rng);
  const std::vector<std::int64_t> ids{4, 0, 4, 2};
  expect_grad_ok([&](auto& in) { return weighted_sum(gather_rows(in[0], ids)); }, {table},
                 "gather_rows");
}

TEST_CASE("gradient check: video convolutions and pooling") {
  Rng rng(22);
  for (auto s : std::vector<Shape>{{1, 2, 4, 4, 1}, {2, 3, 4, 6, 2}, {1, 4, 6, 4, 3}}) {
    auto x = random_tensor(s, rng);
    const auto c = s.back();
    auto ks = random_tensor({1, 3, 3, c, 2}, rng);
    auto kt = random_tensor({3, 1, 1, c, 2}, rng);
    expect_grad_ok([](auto& in) { return weighted_sum(conv_spatial(in[0], in[1])); }, {x, ks},
                   "conv_spatial");
    expect_grad_ok([](auto& in) { return weighted_sum(conv_spatial(in[0], in[1], 2)); }, {x, ks},
                   "conv_spatial stride 2");
    expect_grad_ok([](auto& in) { return weighted_sum(conv_temporal(in[0], in[1])); }, {x, kt},
                   "conv_temporal");
    auto k3 = random_tensor({3, 3, 3, c, 2}, rng);
    expect_grad_ok([](auto& in) { return weighted_sum(conv3d(in[0], in[1])); }, {x, k3}, "conv3d");
    expect_grad_ok([](auto& in) { return weighted_sum(maxpool_spatial(in[0])); }, {x}, "maxpool");
    expect_grad_ok([](auto& in) { return weighted_sum(global_avg_pool_spatial(in[0])); }, {x},
                   "avg_pool");
  }
}

TEST_CASE("gradient check: lstm cell and attention") {
  Rng rng(23);
  for (auto [n, in, h] : std::vector<std::array<int, 3>>{{1, 2, 1}, {2, 3, 2}, {3, 2, 4}}) {
    std::vector<Tensor> inputs{random_tensor({n, in}, rng),          random_tensor({n, h}, rng),
                               random_tensor({n, h}, rng),           random_tensor({in, 4 * h}, rng),
                               random_tensor({h, 4 * h}, rng),       random_tensor({4 * h}, rng)};
    expect_grad_ok(
        [](auto& v) {
          auto s = lstm_cell(v[0], {v[1], v[2]}, v[3], v[4], v[5]);
          return add(weighted_sum(s.h, 1), weighted_sum(s.c, 2));
        },
        inputs, "lstm_cell");
  }
  for (auto [s, d, heads] : std::vector<std::array<int, 3>>{{1, 2, 1}, {3, 4, 2}, {4, 6, 3}}) {
    std::vector<Tensor> inputs{random_tensor({2, s, d}, rng)};
    for (int i = 0; i < 4; ++i) {
      inputs.push_back(random_tensor({d, d}, rng, 0.5));
      inputs.push_back(random_tensor({d}, rng, 0.1));
    }
    const int hh = heads;
    expect_grad_ok(
        [hh](auto& v) {
          AttentionWeights w{v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
          return weighted_sum(multi_head_attention(v[0], w, hh));
        },
        inputs, "attention");
  }
}
