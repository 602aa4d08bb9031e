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

namespace avvit {

// FLOP convention shared by the analytic counters and the instrumented ops.
//   * matmul-like ops (matmul, bmm, linear, convolutions): 2 FLOPs per
//     multiply-add;
//   * pointwise and normalizing ops (arithmetic, activations, softmax,
//     log-softmax, layer norm, bias/positional adds): 1 FLOP per output
//     element;
//   * reductions and pooling: 1 FLOP per input element;
//   * data movement (reshape, permute, concat, slice, gather): free.
inline constexpr std::int64_t kFlopsPerMultAdd = 2;

struct LayerCost {
  std::string name;
  std::int64_t params = 0;
  std::int64_t mult_adds = 0;
  std::int64_t flops = 0;

  bool operator==(const LayerCost&) const = default;
};

struct CostReport {
  std::int64_t params = 0;
  std::int64_t mult_adds = 0;
  std::int64_t flops = 0;
  std::vector<LayerCost> per_layer;

  // Adds to the named layer (creating it on first use) and to the totals.
  void add(const std::string& layer, std::int64_t params, std::int64_t mult_adds,
           std::int64_t flops);
  void add(const LayerCost& c) { add(c.name, c.params, c.mult_adds, c.flops); }

  // Sorted by layer name with all-zero layers removed, so reports built in
  // different orders compare equal.
  CostReport normalized() const;
  // Layers whose name starts with `prefix` (totals recomputed).
  CostReport filtered(const std::string& prefix) const;
  bool totals_consistent() const;

  std::string to_text() const;
  static std::string convention();

  bool operator==(const CostReport& other) const;
};

// Human-readable list of layers that differ between two reports; empty if equal.
std::string diff_reports(const CostReport& expected, const CostReport& actual);

}  // namespace avvit
