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

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "avvit/graph.hpp"
#include "avvit/tensor.hpp"

namespace avvit {

// ---------------------------------------------------------------------------
// Linear algebra

// [m x k] x [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// Batched [N x m x k] x [N x k x n]; with transpose_b, b is [N x n x k].
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);
// x[..., in] * w[in x out] + bias[out]. `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// ---------------------------------------------------------------------------
// Elementwise

// b's shape must equal a's shape or a suffix of it (broadcast over leading axes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);
// Exact (erf) form.
Tensor gelu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Softmax family and layer norm act on the last axis.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);
// gamma/beta may be undefined for the bare normalization.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// ---------------------------------------------------------------------------
// Shape and data movement

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, std::int64_t begin, std::int64_t end);
// [n, x.shape...], every copy sharing x's gradient.
Tensor expand_leading(const Tensor& x, std::int64_t n);
// a[T x d], b[U x d] -> out[t][u] = a[t] + b[u], shape [T x U x d].
Tensor outer_add(const Tensor& a, const Tensor& b);
// Rows of table[V x d] selected by ids -> [ids.size() x d].
Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> ids);

// ---------------------------------------------------------------------------
// Video convolutions. Activations are [B x T x H x W x C].

// kernel [1 x kh x kw x C_in x C_out], odd kh/kw, "same" padding, spatial stride.
Tensor conv_spatial(const Tensor& x, const Tensor& kernel, int stride = 1);
// kernel [kt x 1 x 1 x C_in x C_out], odd kt, "same" padding, temporal stride.
Tensor conv_temporal(const Tensor& x, const Tensor& kernel, int stride = 1);
// Full kernel [kt x kh x kw x C_in x C_out], odd extents, "same" padding in
// all three axes; stride applies to H and W only.
Tensor conv3d(const Tensor& x, const Tensor& kernel, int stride = 1);
// No implicit padding: (H - window) and (W - window) must be multiples of stride.
Tensor maxpool_spatial(const Tensor& x, int window = 2, int stride = 2);
// Mean over H and W -> [B x T x C].
Tensor global_avg_pool_spatial(const Tensor& x);

// ---------------------------------------------------------------------------
// Composite blocks (built from the primitives above).

struct LstmState {
  Tensor h;
  Tensor c;
};

// Gate layout along the 4H axis: input, forget, cell, output.
// x[N x in], state.{h,c}[N x H], wx[in x 4H], wh[H x 4H], b[4H].
LstmState lstm_cell(const Tensor& x, const LstmState& state, const Tensor& wx, const Tensor& wh,
                    const Tensor& b);

struct AttentionWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

// Self-attention over the second-to-last axis of x[..., S, d]; heads must
// divide d. Scale is 1/sqrt(d / heads).
Tensor multi_head_attention(const Tensor& x, const AttentionWeights& w, int heads);

namespace detail {

struct OpCost {
  std::int64_t mult_adds = 0;
  std::int64_t flops = 0;
};

// Marks `out` as requiring grad when any input does, checks finiteness and
// appends an OpRecord to the active graph.
Tensor record_op(const char* name, std::vector<Tensor> inputs, Tensor out, OpCost cost,
                 std::string meta, std::function<void(const Tensor&)> backward,
                 std::function<Tensor()> forward);

// C = op(A) * op(B) (+ C when accumulate). Row-major, dense.
void gemm(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
          std::int64_t n, bool transpose_a, bool transpose_b, bool accumulate);

}  // namespace detail

}  // namespace avvit
