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

#include "avvit/run_config.hpp"

#include <set>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "avvit/error.hpp"

namespace avvit {

namespace {

const std::vector<std::string>& run_keys() {
  static const std::vector<std::string> k{"preset",        "profile_batch", "profile_steps",
                                          "profile_labels", "profile_runs", "eval_noise_seed"};
  return k;
}

}  // namespace

RunConfig RunConfig::from(const KeyValues& kv) {
  std::set<std::string> known(run_keys().begin(), run_keys().end());
  for (const auto* keys : {&ModelConfig::keys(), &TrainConfig::keys(), &TaskConfig::keys()}) {
    known.insert(keys->begin(), keys->end());
  }
  std::string unknown;
  for (const auto& [key, value] : kv.entries()) {
    if (!known.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw ConfigError("unknown configuration keys: " + unknown);

  RunConfig c;
  KeyValues model_kv = kv;
  if (!kv.has("preset")) model_kv.set("preset", "desk");
  c.model = ModelConfig::from(model_kv);
  c.train = TrainConfig::from(model_kv);
  c.task = TaskConfig::from(kv, TaskConfig{});
  if (kv.has("profile_batch")) c.profile.batch = kv.get_int("profile_batch");
  if (kv.has("profile_steps")) c.profile.steps = kv.get_int("profile_steps");
  if (kv.has("profile_labels")) c.profile.labels = kv.get_int("profile_labels");
  if (kv.has("profile_runs")) c.profile.runs = static_cast<int>(kv.get_int("profile_runs"));
  if (kv.has("eval_noise_seed")) c.eval_noise_seed = static_cast<std::uint64_t>(kv.get_int("eval_noise_seed"));
  if (c.profile.batch < 1 || c.profile.steps < 1 || c.profile.labels < 0 || c.profile.runs < 1) {
    throw ConfigError("profile_batch, profile_steps and profile_runs must be >= 1, profile_labels >= 0");
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from(KeyValues::load(path)); }

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "preset = " << model.preset << '\n'
     << model.to_text() << train.to_text() << task.to_text()
     << "profile_batch = " << profile.batch << '\n'
     << "profile_steps = " << profile.steps << '\n'
     << "profile_labels = " << profile.labels << '\n'
     << "profile_runs = " << profile.runs << '\n'
     << "eval_noise_seed = " << eval_noise_seed << '\n';
  return os.str();
}

void keep_large_allocations_mapped() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace avvit
