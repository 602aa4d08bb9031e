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

#include "avvit/rnnt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "avvit/error.hpp"
#include "avvit/ops.hpp"

namespace avvit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

RnntLattice rnnt_lattice(const Tensor& log_probs, std::span<const std::int64_t> labels) {
  if (log_probs.rank() != 3) {
    throw DimensionError("rnnt log_probs must be [T x (U+1) x V], got " +
                         to_string(log_probs.shape()));
  }
  const auto T = log_probs.dim(0), U1 = log_probs.dim(1), V = log_probs.dim(2);
  const auto U = static_cast<std::int64_t>(labels.size());
  if (U1 != U + 1) {
    throw DimensionError("rnnt lattice has " + std::to_string(U1) + " label positions for " +
                         std::to_string(U) + " labels");
  }
  for (auto y : labels) {
    if (y <= kBlank || y >= V) throw InputError("label id " + std::to_string(y) + " invalid");
  }
  const double* lp = log_probs.data();
  for (std::int64_t r = 0; r < T * U1; ++r) {
    double z = kNegInf;
    for (std::int64_t k = 0; k < V; ++k) z = log_add(z, lp[r * V + k]);
    if (!(std::abs(z) <= 1e-6)) {
      throw ContractError("rnnt log_probs row " + std::to_string(r) +
                          " is not log-normalized (logsumexp " + std::to_string(z) + ")");
    }
  }
  auto at = [&](std::int64_t t, std::int64_t u, std::int64_t k) { return lp[(t * U1 + u) * V + k]; };
  RnntLattice L{Tensor({T, U1}), Tensor({T, U1})};
  double* a = L.alpha.mutable_data();
  double* b = L.beta.mutable_data();
  for (std::int64_t t = 0; t < T; ++t) {
    for (std::int64_t u = 0; u < U1; ++u) {
      if (t == 0 && u == 0) {
        a[0] = 0.0;
        continue;
      }
      double v = kNegInf;
      if (t > 0) v = log_add(v, a[(t - 1) * U1 + u] + at(t - 1, u, kBlank));
      if (u > 0) v = log_add(v, a[t * U1 + u - 1] + at(t, u - 1, labels[u - 1]));
      a[t * U1 + u] = v;
    }
  }
  for (std::int64_t t = T - 1; t >= 0; --t) {
    for (std::int64_t u = U; u >= 0; --u) {
      if (t == T - 1 && u == U) {
        b[t * U1 + u] = at(t, u, kBlank);
        continue;
      }
      double v = kNegInf;
      if (t < T - 1) v = log_add(v, b[(t + 1) * U1 + u] + at(t, u, kBlank));
      if (u < U) v = log_add(v, b[t * U1 + u + 1] + at(t, u, labels[u]));
      b[t * U1 + u] = v;
    }
  }
  L.loss_from_alpha = -(a[(T - 1) * U1 + U] + at(T - 1, U, kBlank));
  L.loss_from_beta = -b[0];
  return L;
}

Tensor rnnt_loss(const Tensor& log_probs, std::span<const std::int64_t> labels) {
  std::vector<std::int64_t> y(labels.begin(), labels.end());
  auto fw = [log_probs, y] { return Tensor::scalar(rnnt_lattice(log_probs, y).loss_from_alpha); };
  auto bw = [log_probs, y](const Tensor& out) mutable {
    if (!log_probs.requires_grad()) return;
    const RnntLattice L = rnnt_lattice(log_probs, y);
    const auto T = log_probs.dim(0), U1 = log_probs.dim(1), V = log_probs.dim(2);
    const auto U = U1 - 1;
    const double g = out.grad().data()[0];
    const double log_p = -L.loss_from_alpha;
    const double* lp = log_probs.data();
    const double* a = L.alpha.data();
    const double* b = L.beta.data();
    double* dx = log_probs.mutable_grad().data();
    for (std::int64_t t = 0; t < T; ++t) {
      for (std::int64_t u = 0; u < U1; ++u) {
        const std::int64_t node = t * U1 + u;
        // Blank edge to (t+1, u), or termination from the last node.
        const double after_blank = t < T - 1 ? b[node + U1] : (u == U ? 0.0 : kNegInf);
        if (after_blank != kNegInf) {
          dx[node * V + kBlank] -=
              g * std::exp(a[node] + lp[node * V + kBlank] + after_blank - log_p);
        }
        if (u < U) {
          const auto k = y[u];
          dx[node * V + k] -= g * std::exp(a[node] + lp[node * V + k] + b[node + 1] - log_p);
        }
      }
    }
  };
  const auto nodes = log_probs.rank() == 3 ? log_probs.dim(0) * log_probs.dim(1) : 0;
  return detail::record_op("rnnt_loss", {log_probs}, fw(), {0, 2 * nodes},
                           "U=" + std::to_string(y.size()), bw, fw);
}

DecodeResult greedy_decode(const TransducerScorer& scorer, int max_symbols) {
  DecodeResult res;
  TransducerScorer::State state = scorer.initial();
  for (std::int64_t t = 0; t < scorer.frames(); ++t) {
    int emitted = 0;
    while (true) {
      const auto s = scorer.scores(t, state);
      const auto best = std::max_element(s.begin(), s.end()) - s.begin();
      // Ties with blank resolve to blank.
      if (best == kBlank || s[best] <= s[kBlank]) break;
      if (emitted == max_symbols) {
        ++res.capped_frames;
        break;
      }
      res.labels.push_back(best);
      state = scorer.advance(state, best);
      ++emitted;
    }
  }
  return res;
}

}  // namespace avvit
