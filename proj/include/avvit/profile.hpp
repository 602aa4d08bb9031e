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
#include <optional>
#include <string>
#include <vector>

#include "avvit/cost.hpp"
#include "avvit/model.hpp"
#include "avvit/report.hpp"

namespace avvit {

// Published reference figures for the two visual front-ends.
struct ReferenceFigures {
  double params_m = 0.0;
  double gflops = 0.0;
  double latency_ms = 0.0;
};
std::optional<ReferenceFigures> reference_figures(FrontEnd f);

struct ProfileOptions {
  std::int64_t batch = 1;
  std::int64_t steps = 32;
  std::int64_t labels = 5;  // label count per utterance for full-model rows
  int runs = 20;            // timed passes; one extra untimed warm-up pass precedes them
};

struct ProfileRow {
  std::string name;   // e.g. "vit front-end", "vit model"
  FrontEnd front_end = FrontEnd::kVit;
  bool whole_model = false;
  CostReport analytic;
  CostReport instrumented;  // counted during the warm-up pass
  std::vector<double> latency_ms;  // exactly `runs` entries

  bool consistent() const { return analytic == instrumented; }
  double latency_mean() const;
  double latency_std() const;
};

// Profiles the visual front-end (when present) and the whole model for each
// front-end in `front_ends`. Latency is wall-clock of forward passes on
// random inputs of the configured size.
std::vector<ProfileRow> profile(const ModelConfig& base, const std::vector<FrontEnd>& front_ends,
                                const ProfileOptions& opts, std::uint64_t seed);

// Analytic front-end cost (params and ops of the "vgg" / "vit" layers only).
CostReport frontend_costs(const ModelConfig& cfg, std::int64_t batch, std::int64_t steps);

struct ProfileReport {
  Table table;
  std::string footer;  // convention, residuals and ratios
};
ProfileReport format_profile(const ModelConfig& base, const ProfileOptions& opts,
                             const std::vector<ProfileRow>& rows);

}  // namespace avvit
