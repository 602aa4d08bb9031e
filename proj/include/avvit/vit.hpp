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
#include <string>

#include "avvit/cost.hpp"
#include "avvit/nn.hpp"
#include "avvit/tensor.hpp"
#include "avvit/video.hpp"

namespace avvit {

enum class VitPooling {
  kPrependedToken,  // learned token in front of the 16 tubelets
  kFirstTubelet,    // output at tubelet 0
};

struct VitConfig {
  int layers = 6;
  int heads = 8;
  std::int64_t d_model = 512;
  std::int64_t d_ff = 2048;
  VitPooling pool = VitPooling::kPrependedToken;
  TubeletConfig tubelet;
  // Per-step feature width; a linear head maps d_model to it when they differ.
  std::int64_t output_dim = 512;

  void validate() const;
  std::int64_t sequence_length() const {
    return tubelet.tokens_per_step() + (pool == VitPooling::kPrependedToken ? 1 : 0);
  }
  bool has_head() const { return output_dim != d_model; }
  TransformerConfig transformer() const { return {layers, d_model, heads, d_ff, true}; }
};

// Video transformer front-end. Each time step is encoded independently from
// its 16 tubelets; temporal context comes only from the tubelet windows.
class VitFrontend {
 public:
  VitFrontend() = default;
  VitFrontend(ParamStore& ps, const VitConfig& cfg, Rng& rng, std::string name = "vit");

  // frames [B x T x 128 x 128 x 3] -> [B x T x output_dim].
  Tensor operator()(const Tensor& frames) const;
  // tokens [B x T x 16 x token_dim] -> [B x T x output_dim].
  Tensor forward_tokens(const Tensor& tokens) const;

  // Shared affine map: [..., token_dim] -> [..., d_model].
  Tensor embed(const Tensor& tokens) const;
  // x [N x S x d_model] + positional table [S x d_model].
  Tensor add_positional(const Tensor& x) const;

  const VitConfig& config() const { return cfg_; }
  const Linear& projection() const { return proj_; }
  const Tensor& positional_table() const { return pos_; }

  static void count_costs(CostReport& r, const VitConfig& cfg, std::int64_t batch,
                          std::int64_t steps, const std::string& name = "vit");

 private:
  VitConfig cfg_;
  std::string name_;
  Linear proj_;
  Tensor token_;
  Tensor pos_;
  TransformerStack stack_;
  Linear head_;
};

// Tubelets for a batch of clips: [B x T x 128 x 128 x 3] -> [B x T x 16 x D].
Tensor batch_tubelets(const Tensor& frames, const TubeletConfig& cfg);

}  // namespace avvit
