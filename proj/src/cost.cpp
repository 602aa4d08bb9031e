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

#include "avvit/cost.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

namespace avvit {

void CostReport::add(const std::string& layer, std::int64_t p, std::int64_t ma, std::int64_t fl) {
  auto it = std::find_if(per_layer.begin(), per_layer.end(),
                         [&](const LayerCost& c) { return c.name == layer; });
  if (it == per_layer.end()) {
    per_layer.push_back({layer, 0, 0, 0});
    it = per_layer.end() - 1;
  }
  it->params += p;
  it->mult_adds += ma;
  it->flops += fl;
  params += p;
  mult_adds += ma;
  flops += fl;
}

CostReport CostReport::normalized() const {
  CostReport out = *this;
  // Scopes that only moved data carry no cost and are dropped.
  std::erase_if(out.per_layer, [](const LayerCost& c) {
    return c.params == 0 && c.mult_adds == 0 && c.flops == 0;
  });
  std::sort(out.per_layer.begin(), out.per_layer.end(),
            [](const LayerCost& a, const LayerCost& b) { return a.name < b.name; });
  return out;
}

CostReport CostReport::filtered(const std::string& prefix) const {
  CostReport out;
  for (const auto& c : per_layer) {
    if (c.name.compare(0, prefix.size(), prefix) == 0) out.add(c);
  }
  return out;
}

bool CostReport::totals_consistent() const {
  std::int64_t p = 0, ma = 0, fl = 0;
  for (const auto& c : per_layer) {
    p += c.params;
    ma += c.mult_adds;
    fl += c.flops;
  }
  return p == params && ma == mult_adds && fl == flops;
}

bool CostReport::operator==(const CostReport& other) const {
  if (params != other.params || mult_adds != other.mult_adds || flops != other.flops) return false;
  return normalized().per_layer == other.normalized().per_layer;
}

std::string CostReport::convention() {
  return "FLOP convention: 1 multiply-add = 2 FLOPs (matmul, linear, conv; conv taps in the "
         "zero padding are counted); pointwise, "
         "activation and normalization ops = 1 FLOP per output element; reductions and "
         "pooling = 1 FLOP per input element; data movement = 0.";
}

std::string CostReport::to_text() const {
  std::ostringstream os;
  const auto sorted = normalized();
  std::size_t width = 5;
  for (const auto& c : sorted.per_layer) width = std::max(width, c.name.size());
  os << std::left << std::setw(static_cast<int>(width)) << "layer" << std::right
     << std::setw(14) << "params" << std::setw(18) << "mult_adds" << std::setw(18) << "flops"
     << '\n';
  for (const auto& c : sorted.per_layer) {
    os << std::left << std::setw(static_cast<int>(width)) << c.name << std::right
       << std::setw(14) << c.params << std::setw(18) << c.mult_adds << std::setw(18) << c.flops
       << '\n';
  }
  os << std::left << std::setw(static_cast<int>(width)) << "total" << std::right << std::setw(14)
     << params << std::setw(18) << mult_adds << std::setw(18) << flops << '\n';
  return os.str();
}

std::string diff_reports(const CostReport& expected, const CostReport& actual) {
  std::map<std::string, std::pair<LayerCost, LayerCost>> rows;
  for (const auto& c : expected.per_layer) rows[c.name].first = c;
  for (const auto& c : actual.per_layer) rows[c.name].second = c;
  std::ostringstream os;
  for (const auto& [name, pair] : rows) {
    const auto& [e, a] = pair;
    if (e.params != a.params || e.mult_adds != a.mult_adds || e.flops != a.flops) {
      os << name << ": expected (params " << e.params << ", mult_adds " << e.mult_adds
         << ", flops " << e.flops << ") got (params " << a.params << ", mult_adds "
         << a.mult_adds << ", flops " << a.flops << ")\n";
    }
  }
  if (expected.params != actual.params || expected.mult_adds != actual.mult_adds ||
      expected.flops != actual.flops) {
    os << "totals: expected " << expected.params << '/' << expected.mult_adds << '/'
       << expected.flops << " got " << actual.params << '/' << actual.mult_adds << '/'
       << actual.flops << '\n';
  }
  return os.str();
}

}  // namespace avvit
