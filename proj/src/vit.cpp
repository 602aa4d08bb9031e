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

#include "avvit/vit.hpp"

#include <algorithm>

#include "avvit/error.hpp"
#include "avvit/graph.hpp"
#include "avvit/ops.hpp"

namespace avvit {

void VitConfig::validate() const {
  if (layers < 0) throw ConfigError("vit layers must be non-negative");
  if (d_model <= 0 || d_ff <= 0 || output_dim <= 0) {
    throw ConfigError("vit widths must be positive");
  }
  if (heads <= 0 || d_model % heads != 0) {
    throw ConfigError("vit d_model " + std::to_string(d_model) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (tubelet.patch <= 0 || kFrameSize % tubelet.patch != 0 || tubelet.frames <= 0) {
    throw ConfigError("tubelet patch must divide 128 and frames must be positive");
  }
}

Tensor batch_tubelets(const Tensor& frames, const TubeletConfig& cfg) {
  if (frames.rank() != 5) {
    throw DimensionError("expected [B x T x 128 x 128 x 3], got " + to_string(frames.shape()));
  }
  const auto b = frames.dim(0), t = frames.dim(1);
  const auto clip_size = frames.size() / b;
  const auto tokens = cfg.tokens_per_step(), dim = cfg.token_dim();
  Tensor out({b, t, tokens, dim});
  for (std::int64_t i = 0; i < b; ++i) {
    Shape s(frames.shape().begin() + 1, frames.shape().end());
    std::vector<double> v(frames.data() + i * clip_size, frames.data() + (i + 1) * clip_size);
    Tensor tok = extract_tubelets({Tensor(s, std::move(v)), kFeatureRate}, cfg);
    std::copy_n(tok.data(), tok.size(), out.mutable_data() + i * tok.size());
  }
  return out;
}

VitFrontend::VitFrontend(ParamStore& ps, const VitConfig& cfg, Rng& rng, std::string name)
    : cfg_(cfg), name_(std::move(name)) {
  cfg_.validate();
  proj_ = Linear(ps, name_ + ".embed", cfg_.tubelet.token_dim(), cfg_.d_model, rng);
  if (cfg_.pool == VitPooling::kPrependedToken) {
    token_ = ps.create(name_ + ".token/value", {1, cfg_.d_model}, Init::normal(0.02), rng);
  }
  pos_ = ps.create(name_ + ".pos/table", {cfg_.sequence_length(), cfg_.d_model},
                   Init::normal(0.02), rng);
  stack_ = TransformerStack(ps, name_, cfg_.transformer(), rng);
  if (cfg_.has_head()) head_ = Linear(ps, name_ + ".head", cfg_.d_model, cfg_.output_dim, rng);
}

Tensor VitFrontend::embed(const Tensor& tokens) const {
  if (tokens.dim(-1) != cfg_.tubelet.token_dim()) {
    throw DimensionError("tubelet tokens must have " + std::to_string(cfg_.tubelet.token_dim()) +
                         " values, got " + std::to_string(tokens.dim(-1)));
  }
  return proj_(tokens);
}

Tensor VitFrontend::add_positional(const Tensor& x) const {
  if (x.rank() < 2 || x.dim(-2) != pos_.dim(0) || x.dim(-1) != pos_.dim(1)) {
    throw ConfigError("positional table " + to_string(pos_.shape()) + " does not match tokens " +
                      to_string(x.shape()));
  }
  CostScope scope(name_ + ".pos");
  return add(x, pos_);
}

Tensor VitFrontend::forward_tokens(const Tensor& tokens) const {
  if (tokens.rank() != 4 || tokens.dim(2) != cfg_.tubelet.tokens_per_step()) {
    throw DimensionError("vit expects [B x T x " + std::to_string(cfg_.tubelet.tokens_per_step()) +
                         " x D] tokens, got " + to_string(tokens.shape()));
  }
  const auto b = tokens.dim(0), t = tokens.dim(1), n = b * t;
  const auto d = cfg_.d_model;
  Tensor x;
  {
    Tensor e = embed(tokens);
    CostScope scope(name_ + ".token");
    x = reshape(e, {n, cfg_.tubelet.tokens_per_step(), d});
    if (cfg_.pool == VitPooling::kPrependedToken) {
      x = concat({expand_leading(token_, n), x}, 1);
    }
  }
  x = stack_(add_positional(x));
  Tensor first;
  {
    CostScope scope(name_ + ".token");
    first = reshape(slice(x, 1, 0, 1), {b, t, d});
  }
  return cfg_.has_head() ? head_(first) : first;
}

Tensor VitFrontend::operator()(const Tensor& frames) const {
  return forward_tokens(batch_tubelets(frames, cfg_.tubelet));
}

void VitFrontend::count_costs(CostReport& r, const VitConfig& cfg, std::int64_t batch,
                              std::int64_t steps, const std::string& name) {
  cfg.validate();
  const auto n = batch * steps;
  const auto s = cfg.sequence_length();
  analytic::linear(r, name + ".embed", n * cfg.tubelet.tokens_per_step(),
                   cfg.tubelet.token_dim(), cfg.d_model);
  if (cfg.pool == VitPooling::kPrependedToken) r.add(name + ".token", cfg.d_model, 0, 0);
  r.add(name + ".pos", s * cfg.d_model, 0, n * s * cfg.d_model);
  analytic::transformer(r, name, cfg.transformer(), n, s);
  if (cfg.has_head()) analytic::linear(r, name + ".head", n, cfg.d_model, cfg.output_dim);
}

}  // namespace avvit
