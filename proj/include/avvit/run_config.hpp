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
#include <filesystem>
#include <string>

#include "avvit/config.hpp"
#include "avvit/model.hpp"
#include "avvit/profile.hpp"
#include "avvit/train.hpp"

namespace avvit {

// Everything one CLI invocation needs, read from a single flat key-value
// file. `preset` (paper | desk) seeds the model and training sections; any
// other key overrides one field. Unknown keys are a ConfigError.
struct RunConfig {
  ModelConfig model = ModelConfig::preset_named("desk");
  TrainConfig train = TrainConfig::preset_named("desk");
  TaskConfig task;
  ProfileOptions profile;
  std::uint64_t eval_noise_seed = 7;

  static RunConfig from(const KeyValues& kv);
  static RunConfig load(const std::filesystem::path& path);
  // Complete listing; from(parse(to_text())) reproduces the configuration.
  std::string to_text() const;
};

// Keeps large freed buffers in the heap instead of returning them to the OS,
// so per-step tensors reuse mapped pages (glibc only; a no-op elsewhere).
void keep_large_allocations_mapped();

}  // namespace avvit
