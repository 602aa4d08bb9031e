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
#include <functional>
#include <string>
#include <vector>

#include "avvit/cost.hpp"
#include "avvit/tensor.hpp"

namespace avvit {

// One executed op. `backward` reads the output gradient and accumulates into
// the inputs that require gradients; `forward` recomputes the output from the
// recorded inputs (used by Graph::replay).
struct OpRecord {
  std::string name;
  std::string scope;
  std::string meta;
  std::int64_t mult_adds = 0;
  std::int64_t flops = 0;
  std::vector<Tensor> inputs;
  Tensor output;
  std::function<void(const Tensor& output)> backward;
  std::function<Tensor()> forward;
};

// Tape of executed ops in execution (= topological) order.
//
// kRecord keeps tensor handles and closures so that backward() and replay()
// work; kCountOnly keeps only names and costs, which is what profiling large
// configurations needs.
class Graph {
 public:
  enum class Mode { kRecord, kCountOnly };

  explicit Graph(Mode mode = Mode::kRecord) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Mode mode() const { return mode_; }
  const std::vector<OpRecord>& ops() const { return ops_; }
  void append(OpRecord op) { ops_.push_back(std::move(op)); }
  void clear() { ops_.clear(); }

  // Op costs aggregated per scope. Parameter counts are not known to the
  // graph; see ParamStore::add_params_to.
  CostReport costs() const;

  // Re-executes every recorded op on its recorded inputs and reports whether
  // all outputs are reproduced bit for bit.
  bool replay_matches() const;

  std::int64_t last_backward_visits() const { return backward_visits_; }

 private:
  friend void backward(Graph& graph, const Tensor& loss);

  Mode mode_;
  std::vector<OpRecord> ops_;
  std::int64_t backward_visits_ = 0;
};

// Makes `graph` the active graph of the calling thread for its lifetime.
class GraphScope {
 public:
  explicit GraphScope(Graph& graph);
  ~GraphScope();
  GraphScope(const GraphScope&) = delete;
  GraphScope& operator=(const GraphScope&) = delete;

 private:
  Graph* previous_;
};

// Suspends recording (e.g. for decoding inside a training graph).
class NoGraphScope {
 public:
  NoGraphScope();
  ~NoGraphScope();
  NoGraphScope(const NoGraphScope&) = delete;
  NoGraphScope& operator=(const NoGraphScope&) = delete;

 private:
  Graph* previous_;
};

// Names the layer that subsequent ops are charged to. Scopes nest; the
// innermost name wins (names are absolute, not joined).
class CostScope {
 public:
  explicit CostScope(std::string name);
  ~CostScope();
  CostScope(const CostScope&) = delete;
  CostScope& operator=(const CostScope&) = delete;
};

Graph* active_graph();
const std::string& current_scope();

// Reverse-mode pass over `graph` seeded with d(loss)/d(loss) = 1. Gradients
// accumulate additively into every tensor that requires them.
void backward(Graph& graph, const Tensor& loss);

// Non-finite outputs raise NumericError when enabled (default on).
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

}  // namespace avvit
