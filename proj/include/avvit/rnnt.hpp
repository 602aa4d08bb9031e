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
#include <vector>

#include "avvit/tensor.hpp"

namespace avvit {

inline constexpr std::int64_t kBlank = 0;

// Forward/backward tables of the transducer lattice for log_probs
// [T x (U+1) x V] and labels y[0..U).
struct RnntLattice {
  Tensor alpha;  // [T x (U+1)], alpha[t][u] = log P(reach node (t, u))
  Tensor beta;   // [T x (U+1)], beta[t][u] = log P(finish from node (t, u))
  double loss_from_alpha = 0.0;
  double loss_from_beta = 0.0;
};

// Checks that every row of log_probs is log-normalized within 1e-6 and that
// labels are valid non-blank ids; throws ContractError / InputError.
RnntLattice rnnt_lattice(const Tensor& log_probs, std::span<const std::int64_t> labels);

// -log sum over monotone alignments, as a scalar graph op whose backward
// writes d loss / d log_probs (the negative node occupancies). Costs
// 2 FLOPs per lattice node (one log-add each in the alpha and beta passes).
Tensor rnnt_loss(const Tensor& log_probs, std::span<const std::int64_t> labels);

// Interface the greedy decoder drives: a prediction-network state that is
// advanced by emitted labels, and a joint that scores frame t against it.
class TransducerScorer {
 public:
  struct State {
    std::vector<Tensor> tensors;
  };
  virtual ~TransducerScorer() = default;
  virtual std::int64_t frames() const = 0;
  virtual State initial() const = 0;
  virtual State advance(const State& s, std::int64_t label) const = 0;
  // Log probabilities (or any monotone scores) over the vocabulary.
  virtual std::vector<double> scores(std::int64_t t, const State& s) const = 0;
};

struct DecodeResult {
  std::vector<std::int64_t> labels;
  // Frames where the per-frame emission cap stopped decoding.
  std::int64_t capped_frames = 0;
};

inline constexpr int kMaxSymbolsPerFrame = 10;

// At each frame, emit the best non-blank label and advance the prediction
// state until blank scores highest (or the cap is hit), then move on.
DecodeResult greedy_decode(const TransducerScorer& scorer, int max_symbols = kMaxSymbolsPerFrame);

}  // namespace avvit
