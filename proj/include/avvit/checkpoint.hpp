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
#include <utility>
#include <vector>

#include "avvit/nn.hpp"
#include "avvit/tensor.hpp"

namespace avvit {

// Single-file checkpoint:
//   "AVVITCK1"            8-byte magic
//   u32 version           (1)
//   u64 n, n bytes        config text, echoed verbatim
//   u64 step
//   u32 count             named blobs, each:
//     u32 n, n bytes      name
//     u32 rank, rank x u64 extents
//     numel x f64         values
// All integers and doubles are little-endian.
struct Checkpoint {
  std::string config_text;
  std::int64_t step = 0;
  std::vector<std::pair<std::string, Tensor>> blobs;

  const Tensor& blob(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies blob values into same-named parameters; every parameter must be
// present with a matching shape (FormatError otherwise).
void load_params(ParamStore& ps, const Checkpoint& ckpt, const std::string& prefix = "");

}  // namespace avvit
