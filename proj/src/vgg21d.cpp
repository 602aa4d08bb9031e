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

#include "avvit/vgg21d.hpp"

#include <algorithm>
#include <cmath>

#include "avvit/error.hpp"
#include "avvit/graph.hpp"
#include "avvit/ops.hpp"
#include "avvit/video.hpp"

namespace avvit {

Vgg21dConfig Vgg21dConfig::footnote_channels() {
  Vgg21dConfig c;
  c.layer_channels = {23, 64, 230, 128, 460, 256, 921, 512, 460, 512};
  return c;
}

bool Vgg21dConfig::pools_after(int pair) const {
  return std::find(pool_after.begin(), pool_after.end(), pair) != pool_after.end();
}

std::int64_t Vgg21dConfig::final_extent() const {
  std::int64_t e = kFrameSize;
  for (int p = 1; p <= kPairs; ++p) {
    if (pools_after(p)) e /= 2;
  }
  return e;
}

void Vgg21dConfig::validate() const {
  if (static_cast<int>(layer_channels.size()) != kLayers) {
    throw ConfigError("vgg21d needs exactly " + std::to_string(kLayers) +
                      " layer channel counts, got " + std::to_string(layer_channels.size()));
  }
  for (auto c : layer_channels) {
    if (c <= 0) throw ConfigError("vgg21d channel counts must be positive");
  }
  for (std::size_t i = 0; i < pool_after.size(); ++i) {
    if (pool_after[i] < 1 || pool_after[i] > kPairs) {
      throw ConfigError("vgg21d pool index " + std::to_string(pool_after[i]) + " outside 1..5");
    }
    if (std::count(pool_after.begin(), pool_after.end(), pool_after[i]) > 1) {
      throw ConfigError("vgg21d pool index repeated");
    }
  }
  if (output_dim <= 0) throw ConfigError("vgg21d output_dim must be positive");
}

Vgg21d::Vgg21d(ParamStore& ps, const Vgg21dConfig& cfg, Rng& rng, std::string name)
    : cfg_(cfg), name_(std::move(name)) {
  cfg_.validate();
  std::int64_t cin = kChannels;
  auto make = [&](const std::string& n, Shape kshape, Conv::Kind kind) {
    const auto fan_in = kshape[0] * kshape[1] * kshape[2] * kshape[3];
    const auto cout = kshape[4];
    Conv c{n, ps.create(n + "/kernel", std::move(kshape),
                        Init::normal(std::sqrt(2.0 / static_cast<double>(fan_in))), rng),
           ps.create(n + "/bias", {cout}, Init::zeros(), rng), kind};
    convs_.push_back(std::move(c));
  };
  for (int p = 0; p < Vgg21dConfig::kPairs; ++p) {
    const auto mid = cfg_.layer_channels[2 * p], out = cfg_.layer_channels[2 * p + 1];
    const std::string base = name_ + ".conv" + std::to_string(p + 1);
    if (cfg_.full3d) {
      make(base, {3, 3, 3, cin, out}, Conv::Kind::kFull);
    } else {
      make(base + "s", {1, 3, 3, cin, mid}, Conv::Kind::kSpatial);
      make(base + "t", {3, 1, 1, mid, out}, Conv::Kind::kTemporal);
    }
    cin = out;
  }
  head_ = Linear(ps, name_ + ".head", cin, cfg_.output_dim, rng);
}

Tensor Vgg21d::operator()(const Tensor& frames) const {
  if (frames.rank() != 5 || frames.dim(2) != kFrameSize || frames.dim(3) != kFrameSize ||
      frames.dim(4) != kChannels) {
    throw DimensionError("vgg21d expects [B x T x 128 x 128 x 3], got " +
                         to_string(frames.shape()));
  }
  Tensor x = frames;
  const std::size_t per_pair = cfg_.full3d ? 1 : 2;
  for (int p = 0; p < Vgg21dConfig::kPairs; ++p) {
    for (std::size_t j = 0; j < per_pair; ++j) {
      const Conv& c = convs_[p * per_pair + j];
      CostScope scope(c.name);
      switch (c.kind) {
        case Conv::Kind::kSpatial:
          x = conv_spatial(x, c.kernel);
          break;
        case Conv::Kind::kTemporal:
          x = conv_temporal(x, c.kernel);
          break;
        case Conv::Kind::kFull:
          x = conv3d(x, c.kernel);
          break;
      }
      x = relu(add(x, c.bias));
    }
    if (cfg_.pools_after(p + 1)) {
      CostScope scope(name_ + ".pool" + std::to_string(p + 1));
      x = maxpool_spatial(x);
    }
  }
  {
    CostScope scope(name_ + ".gap");
    x = global_avg_pool_spatial(x);
  }
  return head_(x);
}

void Vgg21d::count_costs(CostReport& r, const Vgg21dConfig& cfg, std::int64_t batch,
                         std::int64_t steps, const std::string& name) {
  cfg.validate();
  const auto frames = batch * steps;
  std::int64_t extent = kFrameSize, cin = kChannels;
  auto conv = [&](const std::string& n, std::int64_t taps, std::int64_t ci, std::int64_t co) {
    const auto pixels = frames * extent * extent;
    const auto ma = pixels * taps * ci * co;
    // Kernel and bias; conv, bias add and ReLU.
    r.add(n, taps * ci * co + co, ma, kFlopsPerMultAdd * ma + 2 * pixels * co);
  };
  for (int p = 0; p < Vgg21dConfig::kPairs; ++p) {
    const auto mid = cfg.layer_channels[2 * p], out = cfg.layer_channels[2 * p + 1];
    const std::string base = name + ".conv" + std::to_string(p + 1);
    if (cfg.full3d) {
      conv(base, 27, cin, out);
    } else {
      conv(base + "s", 9, cin, mid);
      conv(base + "t", 3, mid, out);
    }
    cin = out;
    if (cfg.pools_after(p + 1)) {
      extent /= 2;
      // Every output reads a 2x2 window.
      r.add(name + ".pool" + std::to_string(p + 1), 0, 0, frames * extent * extent * cin * 4);
    }
  }
  r.add(name + ".gap", 0, 0, frames * extent * extent * cin);
  analytic::linear(r, name + ".head", frames, cin, cfg.output_dim);
}

}  // namespace avvit
