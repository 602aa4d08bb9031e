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

#include "avvit/nn.hpp"

#include <cmath>

#include "avvit/error.hpp"
#include "avvit/graph.hpp"

namespace avvit {

std::string layer_of(const std::string& param_name) {
  const auto slash = param_name.rfind('/');
  return slash == std::string::npos ? param_name : param_name.substr(0, slash);
}

Tensor ParamStore::create(const std::string& name, Shape shape, Init init, Rng& rng) {
  if (contains(name)) throw ConfigError("duplicate parameter " + name);
  Tensor t(std::move(shape));
  auto v = t.mutable_values();
  switch (init.kind) {
    case Init::Kind::kZeros:
      break;
    case Init::Kind::kOnes:
      std::fill(v.begin(), v.end(), 1.0);
      break;
    case Init::Kind::kNormal:
      for (double& x : v) x = rng.normal(init.scale);
      break;
    case Init::Kind::kUniform:
      for (double& x : v) x = rng.uniform(-init.scale, init.scale);
      break;
  }
  t.set_requires_grad(true);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ConfigError("unknown parameter " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

std::int64_t ParamStore::total() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

void ParamStore::add_params_to(CostReport& report) const {
  for (const auto& [name, t] : entries_) report.add(layer_of(name), t.size(), 0, 0);
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

// ---------------------------------------------------------------------------

Linear::Linear(ParamStore& ps, std::string name, std::int64_t in, std::int64_t out, Rng& rng,
               bool bias)
    : name_(std::move(name)) {
  weight_ = ps.create(name_ + "/weight", {in, out},
                      Init::normal(1.0 / std::sqrt(static_cast<double>(in))), rng);
  if (bias) bias_ = ps.create(name_ + "/bias", {out}, Init::zeros(), rng);
}

Tensor Linear::operator()(const Tensor& x) const {
  CostScope scope(name_);
  return linear(x, weight_, bias_);
}

LayerNorm::LayerNorm(ParamStore& ps, std::string name, std::int64_t width, Rng& rng)
    : name_(std::move(name)) {
  gamma_ = ps.create(name_ + "/gamma", {width}, Init::ones(), rng);
  beta_ = ps.create(name_ + "/beta", {width}, Init::zeros(), rng);
}

Tensor LayerNorm::operator()(const Tensor& x) const {
  CostScope scope(name_);
  return layer_norm(x, gamma_, beta_, kEps);
}

SelfAttention::SelfAttention(ParamStore& ps, std::string name, std::int64_t width, int heads,
                             Rng& rng)
    : name_(std::move(name)), heads_(heads) {
  if (heads <= 0 || width % heads != 0) {
    throw ConfigError(name_ + ": width " + std::to_string(width) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const Init w = Init::normal(1.0 / std::sqrt(static_cast<double>(width)));
  w_.wq = ps.create(name_ + "/wq", {width, width}, w, rng);
  w_.bq = ps.create(name_ + "/bq", {width}, Init::zeros(), rng);
  w_.wk = ps.create(name_ + "/wk", {width, width}, w, rng);
  w_.bk = ps.create(name_ + "/bk", {width}, Init::zeros(), rng);
  w_.wv = ps.create(name_ + "/wv", {width, width}, w, rng);
  w_.bv = ps.create(name_ + "/bv", {width}, Init::zeros(), rng);
  w_.wo = ps.create(name_ + "/wo", {width, width}, w, rng);
  w_.bo = ps.create(name_ + "/bo", {width}, Init::zeros(), rng);
}

Tensor SelfAttention::operator()(const Tensor& x) const {
  CostScope scope(name_);
  return multi_head_attention(x, w_, heads_);
}

FeedForward::FeedForward(ParamStore& ps, std::string name, std::int64_t width,
                         std::int64_t hidden, Rng& rng)
    : name_(std::move(name)) {
  w1_ = ps.create(name_ + "/w1", {width, hidden},
                  Init::normal(1.0 / std::sqrt(static_cast<double>(width))), rng);
  b1_ = ps.create(name_ + "/b1", {hidden}, Init::zeros(), rng);
  w2_ = ps.create(name_ + "/w2", {hidden, width},
                  Init::normal(1.0 / std::sqrt(static_cast<double>(hidden))), rng);
  b2_ = ps.create(name_ + "/b2", {width}, Init::zeros(), rng);
}

Tensor FeedForward::operator()(const Tensor& x) const {
  CostScope scope(name_);
  return linear(gelu(linear(x, w1_, b1_)), w2_, b2_);
}

TransformerStack::TransformerStack(ParamStore& ps, const std::string& name,
                                   const TransformerConfig& cfg, Rng& rng)
    : final_norm_(cfg.final_norm) {
  if (cfg.layers < 0) throw ConfigError(name + ": negative layer count");
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string bn = name + ".block" + std::to_string(i);
    Block b;
    b.name = bn;
    b.ln1 = LayerNorm(ps, bn + ".ln1", cfg.width, rng);
    b.attn = SelfAttention(ps, bn + ".attn", cfg.width, cfg.heads, rng);
    b.ln2 = LayerNorm(ps, bn + ".ln2", cfg.width, rng);
    b.ff = FeedForward(ps, bn + ".ff", cfg.width, cfg.ff_width, rng);
    blocks_.push_back(std::move(b));
  }
  if (final_norm_) final_ = LayerNorm(ps, name + ".final_ln", cfg.width, rng);
}

Tensor TransformerStack::operator()(Tensor x) const {
  for (const auto& b : blocks_) {
    Tensor attn_out = b.attn(b.ln1(x));
    {
      CostScope scope(b.name);
      x = add(x, attn_out);
    }
    Tensor ff_out = b.ff(b.ln2(x));
    {
      CostScope scope(b.name);
      x = add(x, ff_out);
    }
  }
  return final_norm_ ? final_(x) : x;
}

LstmLayer::LstmLayer(ParamStore& ps, std::string name, std::int64_t in, std::int64_t hidden,
                     Rng& rng)
    : name_(std::move(name)), hidden_(hidden) {
  const Init w = Init::uniform(1.0 / std::sqrt(static_cast<double>(hidden)));
  wx_ = ps.create(name_ + "/wx", {in, 4 * hidden}, w, rng);
  wh_ = ps.create(name_ + "/wh", {hidden, 4 * hidden}, w, rng);
  b_ = ps.create(name_ + "/b", {4 * hidden}, Init::zeros(), rng);
}

LstmState LstmLayer::zero_state() const {
  return {Tensor::zeros({1, hidden_}), Tensor::zeros({1, hidden_})};
}

LstmState LstmLayer::step(const Tensor& x, const LstmState& state) const {
  CostScope scope(name_);
  return lstm_cell(x, state, wx_, wh_, b_);
}

Tensor LstmLayer::run(const Tensor& seq) const {
  if (seq.rank() != 2) throw DimensionError("LstmLayer::run expects [L x in]");
  const auto steps = seq.dim(0);
  LstmState state = zero_state();
  std::vector<Tensor> outs;
  outs.reserve(static_cast<std::size_t>(steps));
  for (std::int64_t t = 0; t < steps; ++t) {
    Tensor xt;
    {
      CostScope scope(name_);
      xt = slice(seq, 0, t, t + 1);
    }
    state = step(xt, state);
    outs.push_back(state.h);
  }
  CostScope scope(name_);
  return steps == 1 ? outs[0] : concat(outs, 0);
}

// ---------------------------------------------------------------------------

namespace analytic {

void linear(CostReport& r, const std::string& name, std::int64_t rows, std::int64_t in,
            std::int64_t out, bool bias, bool with_params) {
  const auto ma = rows * in * out;
  r.add(name, with_params ? in * out + (bias ? out : 0) : 0, ma, kFlopsPerMultAdd * ma + (bias ? rows * out : 0));
}

void layer_norm(CostReport& r, const std::string& name, std::int64_t rows, std::int64_t width) {
  r.add(name, 2 * width, 0, rows * width);
}

void self_attention(CostReport& r, const std::string& name, std::int64_t n, std::int64_t s,
                    std::int64_t width, int heads) {
  for (int i = 0; i < 4; ++i) linear(r, name, n * s, width, width);
  // Scores and context: two batched products of n*heads [s x dh] blocks.
  const auto ma = n * s * s * width;
  const auto score_elems = n * heads * s * s;
  r.add(name, 0, 2 * ma, 2 * kFlopsPerMultAdd * ma + 2 * score_elems);  // + scale, softmax
}

void feed_forward(CostReport& r, const std::string& name, std::int64_t rows, std::int64_t width,
                  std::int64_t hidden) {
  linear(r, name, rows, width, hidden);
  r.add(name, 0, 0, rows * hidden);  // gelu
  linear(r, name, rows, hidden, width);
}

void transformer(CostReport& r, const std::string& name, const TransformerConfig& cfg,
                 std::int64_t n, std::int64_t s) {
  const auto rows = n * s;
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string bn = name + ".block" + std::to_string(i);
    layer_norm(r, bn + ".ln1", rows, cfg.width);
    self_attention(r, bn + ".attn", n, s, cfg.width, cfg.heads);
    layer_norm(r, bn + ".ln2", rows, cfg.width);
    feed_forward(r, bn + ".ff", rows, cfg.width, cfg.ff_width);
    r.add(bn, 0, 0, 2 * rows * cfg.width);  // residual adds
  }
  if (cfg.final_norm) layer_norm(r, name + ".final_ln", rows, cfg.width);
}

void lstm_step(CostReport& r, const std::string& name, std::int64_t rows, std::int64_t in,
               std::int64_t hidden) {
  const auto g = 4 * hidden;
  const auto ma = rows * in * g + rows * hidden * g;
  // Bias and gate sum over 4H; three sigmoids, two tanh, three products and
  // the cell sum over H.
  r.add(name, 0, ma, kFlopsPerMultAdd * ma + 2 * rows * g + 9 * rows * hidden);
}

void lstm_params(CostReport& r, const std::string& name, std::int64_t in, std::int64_t hidden) {
  r.add(name, (in + hidden + 1) * 4 * hidden, 0, 0);
}

}  // namespace analytic

}  // namespace avvit
