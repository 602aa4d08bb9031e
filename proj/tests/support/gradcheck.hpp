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

// Test-only helpers: random tensors and a central finite-difference gradient
// checker. Kept out of the library so the oracle stays independent of the
// code paths it verifies.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "avvit/graph.hpp"
#include "avvit/nn.hpp"
#include "avvit/ops.hpp"

namespace avvit::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double stddev = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.mutable_values()) v = rng.normal(stddev);
  return t;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<input>[<index>]"
  std::int64_t checked = 0;
};

// Compares backward() against central differences for every element of
// every input. `f` builds a scalar loss from the inputs using library ops.
// Relative error is |analytic - numeric| / max(1, |analytic|, |numeric|).
// At most `max_elements_per_input` evenly spaced elements per input are
// perturbed (0 = all).
inline GradCheckResult grad_check(const std::function<Tensor(std::vector<Tensor>&)>& f,
                                  std::vector<Tensor> inputs, double eps = 1e-5,
                                  std::int64_t max_elements_per_input = 0) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.clear_grad();
  }
  {
    Graph g;
    GraphScope scope(g);
    Tensor loss = f(inputs);
    backward(g, loss);
  }
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) {
    analytic.emplace_back(t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                       : std::vector<double>(t.size(), 0.0));
  }
  auto eval = [&] {
    NoGraphScope none;
    return f(inputs).item();
  };
  GradCheckResult res;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto values = inputs[i].mutable_values();
    const std::int64_t n = inputs[i].size();
    const std::int64_t step =
        (max_elements_per_input > 0 && n > max_elements_per_input) ? n / max_elements_per_input : 1;
    for (std::int64_t j = 0; j < n; j += step) {
      const double saved = values[j];
      values[j] = saved + eps;
      const double up = eval();
      values[j] = saved - eps;
      const double down = eval();
      values[j] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i][j];
      const double rel =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = "input" + std::to_string(i) + "[" + std::to_string(j) + "]";
      }
    }
  }
  return res;
}

// sum(out * weights) with fixed random weights, so every output element
// carries a distinct gradient.
inline Tensor weighted_sum(const Tensor& out, std::uint64_t seed = 7) {
  Rng rng(seed);
  Tensor w = random_tensor(out.shape(), rng);
  return sum(mul(out, w));
}

}  // namespace avvit::testing
