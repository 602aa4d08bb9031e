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
#include <vector>

#include "avvit/cost.hpp"
#include "avvit/nn.hpp"
#include "avvit/tensor.hpp"

namespace avvit {

// VGG-style (2+1)D video front-end: five (spatial [1,3,3], temporal [3,1,1])
// conv pairs with ReLU, 2x2 max pooling after selected pairs, then a global
// spatial average and a linear map to `output_dim` per time step.
struct Vgg21dConfig {
  // Output channels of the 10 convs, alternating spatial / temporal.
  std::vector<std::int64_t> layer_channels{64, 64, 128, 128, 256, 256, 512, 512, 512, 512};
  // 1-based indices of the pairs followed by a pool.
  std::vector<int> pool_after{1, 2, 3, 5};
  std::int64_t output_dim = 512;
  // Comparison variant: each pair is a single full [3,3,3] conv producing
  // the pair's output channels.
  bool full3d = false;

  static constexpr int kLayers = 10;
  static constexpr int kPairs = 5;

  // Alternate channel list, loaded verbatim.
  static Vgg21dConfig footnote_channels();
  void validate() const;
  bool pools_after(int pair) const;
  // Spatial extent after all pools for a 128x128 input.
  std::int64_t final_extent() const;
};

class Vgg21d {
 public:
  Vgg21d() = default;
  Vgg21d(ParamStore& ps, const Vgg21dConfig& cfg, Rng& rng, std::string name = "vgg");

  // frames [B x T x 128 x 128 x 3] -> [B x T x output_dim].
  Tensor operator()(const Tensor& frames) const;
  const Vgg21dConfig& config() const { return cfg_; }

  static void count_costs(CostReport& r, const Vgg21dConfig& cfg, std::int64_t batch,
                          std::int64_t steps, const std::string& name = "vgg");

 private:
  struct Conv {
    std::string name;
    Tensor kernel, bias;
    enum class Kind { kSpatial, kTemporal, kFull } kind;
  };
  Vgg21dConfig cfg_;
  std::string name_;
  std::vector<Conv> convs_;
  Linear head_;
};

}  // namespace avvit
