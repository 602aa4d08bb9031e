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
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "avvit/cost.hpp"
#include "avvit/ops.hpp"
#include "avvit/tensor.hpp"

namespace avvit {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double normal(double stddev = 1.0) { return std::normal_distribution<double>(0.0, stddev)(engine_); }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi_inclusive) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi_inclusive)(engine_);
  }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

struct Init {
  enum class Kind { kZeros, kOnes, kNormal, kUniform };
  Kind kind = Kind::kZeros;
  double scale = 0.0;  // stddev for kNormal, half-width for kUniform

  static Init zeros() { return {Kind::kZeros, 0.0}; }
  static Init ones() { return {Kind::kOnes, 0.0}; }
  static Init normal(double stddev) { return {Kind::kNormal, stddev}; }
  static Init uniform(double half_width) { return {Kind::kUniform, half_width}; }
};

// Ordered registry of trainable tensors. Names are "<layer>/<param>"; the
// layer part is the cost scope the parameter is charged to.
class ParamStore {
 public:
  Tensor create(const std::string& name, Shape shape, Init init, Rng& rng);

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::int64_t total() const;

  void add_params_to(CostReport& report) const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

std::string layer_of(const std::string& param_name);

// Affine map on the last axis; all ops charged to `name`.
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& ps, std::string name, std::int64_t in, std::int64_t out, Rng& rng,
         bool bias = true);
  Tensor operator()(const Tensor& x) const;

  const std::string& name() const { return name_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  std::string name_;
  Tensor weight_;
  Tensor bias_;
};

class LayerNorm {
 public:
  static constexpr double kEps = 1e-6;

  LayerNorm() = default;
  LayerNorm(ParamStore& ps, std::string name, std::int64_t width, Rng& rng);
  Tensor operator()(const Tensor& x) const;

 private:
  std::string name_;
  Tensor gamma_;
  Tensor beta_;
};

class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(ParamStore& ps, std::string name, std::int64_t width, int heads, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  const AttentionWeights& weights() const { return w_; }

 private:
  std::string name_;
  AttentionWeights w_;
  int heads_ = 1;
};

// GELU MLP: width -> hidden -> width.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParamStore& ps, std::string name, std::int64_t width, std::int64_t hidden, Rng& rng);
  Tensor operator()(const Tensor& x) const;

 private:
  std::string name_;
  Tensor w1_, b1_, w2_, b2_;
};

struct TransformerConfig {
  int layers = 1;
  std::int64_t width = 64;
  int heads = 4;
  std::int64_t ff_width = 128;
  bool final_norm = true;
};

// Pre-norm blocks: x + attn(ln1(x)), then x + ff(ln2(x)). Attention runs over
// the second-to-last axis.
class TransformerStack {
 public:
  TransformerStack() = default;
  TransformerStack(ParamStore& ps, const std::string& name, const TransformerConfig& cfg, Rng& rng);
  Tensor operator()(Tensor x) const;

 private:
  struct Block {
    std::string name;
    LayerNorm ln1;
    SelfAttention attn;
    LayerNorm ln2;
    FeedForward ff;
  };
  std::vector<Block> blocks_;
  LayerNorm final_;
  bool final_norm_ = false;
};

class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(ParamStore& ps, std::string name, std::int64_t in, std::int64_t hidden, Rng& rng);

  // seq[L x in] -> outputs[L x hidden], starting from a zero state.
  Tensor run(const Tensor& seq) const;
  LstmState step(const Tensor& x, const LstmState& state) const;
  LstmState zero_state() const;
  std::int64_t hidden() const { return hidden_; }

 private:
  std::string name_;
  Tensor wx_, wh_, b_;
  std::int64_t hidden_ = 0;
};

// Closed-form costs of the blocks above, charged to the same layer names the
// instrumented ops use. `rows` is the number of vectors a block is applied to.
namespace analytic {

// `with_params = false` charges only the compute, for a layer applied again.
void linear(CostReport& r, const std::string& name, std::int64_t rows, std::int64_t in,
            std::int64_t out, bool bias = true, bool with_params = true);
void layer_norm(CostReport& r, const std::string& name, std::int64_t rows, std::int64_t width);
// `n` independent sequences of `s` tokens.
void self_attention(CostReport& r, const std::string& name, std::int64_t n, std::int64_t s,
                    std::int64_t width, int heads);
void feed_forward(CostReport& r, const std::string& name, std::int64_t rows, std::int64_t width,
                  std::int64_t hidden);
void transformer(CostReport& r, const std::string& name, const TransformerConfig& cfg,
                 std::int64_t n, std::int64_t s);
// One LstmLayer::step over `rows` inputs (no parameters).
void lstm_step(CostReport& r, const std::string& name, std::int64_t rows, std::int64_t in,
               std::int64_t hidden);
void lstm_params(CostReport& r, const std::string& name, std::int64_t in, std::int64_t hidden);

}  // namespace analytic

}  // namespace avvit
