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
#include <span>
#include <string>
#include <vector>

#include "avvit/config.hpp"
#include "avvit/cost.hpp"
#include "avvit/nn.hpp"
#include "avvit/rnnt.hpp"
#include "avvit/tensor.hpp"
#include "avvit/vgg21d.hpp"
#include "avvit/vit.hpp"

namespace avvit {

enum class FrontEnd { kVgg21d, kVit, kAudioOnly };

std::string to_string(FrontEnd f);
FrontEnd parse_front_end(const std::string& name);

inline constexpr std::int64_t kAudioDim = 240;

struct ModelConfig {
  std::string preset = "desk";
  FrontEnd front_end = FrontEnd::kVit;
  VitConfig vit;
  Vgg21dConfig vgg;
  std::int64_t visual_dim = 512;
  TransformerConfig encoder{14, 512, 8, 2048, false};
  int pred_layers = 2;
  std::int64_t pred_units = 2048;
  std::int64_t pred_embed = 512;
  std::int64_t joint_dim = 512;
  std::int64_t vocab = 29;

  // "paper" or "desk"; anything else is a ConfigError.
  static ModelConfig preset_named(const std::string& name);
  // Starts from `preset` when given, otherwise every model key is required.
  static ModelConfig from(const KeyValues& kv);
  static const std::vector<std::string>& keys();
  // Complete key = value listing (no preset key), parseable by from().
  std::string to_text() const;
  void validate() const;
  std::int64_t fused_dim() const {
    return kAudioDim + (front_end == FrontEnd::kAudioOnly ? 0 : visual_dim);
  }
};

// One mini-batch of equal-length utterances.
struct Batch {
  Tensor audio;  // [B x T x 240]
  Tensor video;  // [B x T x 128 x 128 x 3]; may be undefined for audio-only models
  std::vector<std::vector<std::int64_t>> labels;
  std::vector<std::string> transcripts;

  std::int64_t size() const { return audio.dim(0); }
  std::int64_t steps() const { return audio.dim(1); }
};

// Channel concatenation, audio first. B and T must agree (SyncError).
Tensor fuse_concat(const Tensor& audio, const Tensor& visual);

// Front-end, fusion, transformer encoder and transducer decoder.
class AvModel {
 public:
  AvModel(const ModelConfig& cfg, std::uint64_t seed);
  AvModel(const AvModel&) = delete;
  AvModel& operator=(const AvModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }

  // [B x T x visual_dim]; undefined for audio-only models.
  Tensor visual_features(const Tensor& video) const;
  // [B x T x enc_width].
  Tensor encode(const Tensor& audio, const Tensor& video) const;
  // Prediction-network outputs for [blank, y...]: [(U+1) x pred_units].
  Tensor prediction(std::span<const std::int64_t> labels) const;
  // Joint over enc [T x enc_width] and pred [(U+1) x pred_units]:
  // log-softmaxed [T x (U+1) x vocab].
  Tensor joint_log_probs(const Tensor& enc, const Tensor& pred) const;
  // Mean transducer loss over the batch.
  Tensor loss(const Batch& batch) const;
  std::vector<DecodeResult> decode(const Batch& batch) const;

  // Closed-form cost of loss() on a batch of `batch` utterances with `steps`
  // frames and `labels` labels each.
  static CostReport count_costs(const ModelConfig& cfg, std::int64_t batch, std::int64_t steps,
                                std::int64_t labels);
  // Same quantity measured by running loss() on `batch`.
  CostReport instrumented_costs(const Batch& batch) const;

 private:
  class Scorer;

  ModelConfig cfg_;
  ParamStore ps_;
  Vgg21d vgg_;
  VitFrontend vit_;
  Linear enc_in_;
  TransformerStack encoder_;
  Tensor embed_;
  std::vector<LstmLayer> lstm_;
  Linear joint_enc_, joint_pred_, joint_out_;
};

}  // namespace avvit
