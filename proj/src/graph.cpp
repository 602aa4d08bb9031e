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

#include "avvit/graph.hpp"

#include <atomic>

#include "avvit/error.hpp"

namespace avvit {

namespace {

thread_local Graph* g_active = nullptr;
thread_local std::vector<std::string> g_scopes;
std::atomic<bool> g_finite_checks{true};

const std::string kRootScope = "(root)";

}  // namespace

Graph* active_graph() { return g_active; }

const std::string& current_scope() { return g_scopes.empty() ? kRootScope : g_scopes.back(); }

GraphScope::GraphScope(Graph& graph) : previous_(g_active) { g_active = &graph; }
GraphScope::~GraphScope() { g_active = previous_; }

NoGraphScope::NoGraphScope() : previous_(g_active) { g_active = nullptr; }
NoGraphScope::~NoGraphScope() { g_active = previous_; }

CostScope::CostScope(std::string name) { g_scopes.push_back(std::move(name)); }
CostScope::~CostScope() { g_scopes.pop_back(); }

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks_enabled() { return g_finite_checks; }

CostReport Graph::costs() const {
  CostReport report;
  for (const auto& op : ops_) report.add(op.scope, 0, op.mult_adds, op.flops);
  return report;
}

bool Graph::replay_matches() const {
  if (mode_ != Mode::kRecord) throw ContractError("replay requires a recording graph");
  for (const auto& op : ops_) {
    if (!op.forward) continue;
    if (!op.forward().bit_equal(op.output)) return false;
  }
  return true;
}

void backward(Graph& graph, const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward needs a scalar loss");
  }
  if (!loss.requires_grad()) throw ContractError("loss does not depend on any parameter");
  if (graph.mode() != Graph::Mode::kRecord) {
    throw ContractError("backward requires a recording graph");
  }
  Tensor seed = loss;
  seed.zero_grad();
  seed.mutable_grad()[0] = 1.0;
  graph.backward_visits_ = 0;
  for (auto it = graph.ops_.rbegin(); it != graph.ops_.rend(); ++it) {
    ++graph.backward_visits_;
    if (!it->backward || !it->output.has_grad()) continue;
    it->backward(it->output);
  }
}

}  // namespace avvit
