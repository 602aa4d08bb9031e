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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avvit/audio.hpp"
#include "avvit/checkpoint.hpp"
#include "avvit/config.hpp"
#include "avvit/model.hpp"
#include "avvit/nn.hpp"
#include "avvit/text.hpp"
#include "avvit/video.hpp"

namespace avvit {

// Linear warm-up from 0 to `base`, constant until `constant_until`, then a
// closed-form exponential anneal that lands on `final_lr` at `anneal_until`
// and holds it afterwards.
struct LrSchedule {
  double base = 1e-4;
  double warmup = 30000;
  double constant_until = 200000;
  double anneal_until = 300000;
  double final_lr = 1e-6;

  static LrSchedule paper() { return {}; }
  // 1e-5 annealed to 5e-8 over 10k steps, no warm-up.
  static LrSchedule finetune() { return {1e-5, 0, 0, 10000, 5e-8}; }

  double lr_at(double step) const;
  void validate() const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm cap; 0 disables
};

// Adam with bias correction over every tensor of a ParamStore. Parameters
// without a gradient this step are treated as having a zero gradient.
class Adam {
 public:
  Adam(ParamStore& params, AdamConfig cfg);

  // Applies one update; `step` (0-based) is only used for diagnostics.
  // Returns the global gradient norm before clipping.
  double update(double lr, std::int64_t step);

  std::int64_t updates() const { return t_; }
  void save(Checkpoint& ck) const;     // "adam.m/<name>", "adam.v/<name>", "adam.t"
  void restore(const Checkpoint& ck);  // FormatError when entries are missing

 private:
  ParamStore& params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::int64_t t_ = 0;
};

// Deterministic 64-bit seed for stream `salt` at index `index` of a run.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::uint64_t salt);

// ---------------------------------------------------------------------------
// Synthetic audio-visual task. Each utterance is `words` words of
// `chars_per_word` letters drawn from the first `classes` letters. Every
// symbol (letters and the separating spaces) lasts `steps_per_symbol` feature
// steps; audio renders letters as class-specific tones and spaces as
// silence; video renders letters as class-specific moving stripes and spaces
// as flat gray, generated at 25 fps and resampled to the feature rate.

struct TaskConfig {
  std::uint64_t seed = 1;
  int classes = 8;
  std::int64_t samples = 32;
  int words = 2;
  int chars_per_word = 2;
  int steps_per_symbol = 2;
  bool video_only = false;  // audio channel is exactly zero

  static const std::vector<std::string>& keys();
  // Keys absent from `kv` keep the values of `defaults`.
  static TaskConfig from(const KeyValues& kv, TaskConfig defaults);
  std::string to_text() const;
  void validate() const;
};

inline constexpr double kSourceFps = 25.0;
inline constexpr std::int64_t kMaxClipFrames = 512;

// Test-time audio condition.
struct Condition {
  enum class Kind { kClean, kSnr, kOverlap };
  Kind kind = Kind::kClean;
  double snr_db = 0.0;

  std::string label() const;  // "∞dB", "20dB", ..., "overlap"
  static Condition clean() { return {}; }
  static Condition snr(double db) { return {Kind::kSnr, db}; }
  static Condition overlap() { return {Kind::kOverlap, 0.0}; }
  // The column set of the evaluation grid.
  static std::vector<Condition> grid();
};

class SyntheticTask {
 public:
  explicit SyntheticTask(TaskConfig cfg);

  const TaskConfig& config() const { return cfg_; }
  std::int64_t size() const { return cfg_.samples; }
  std::int64_t symbols() const;
  std::int64_t steps() const;  // feature steps per utterance
  std::int64_t samples_per_utterance() const;
  const Vocabulary& vocabulary() const { return vocab_; }

  const std::string& transcript(std::int64_t i) const;
  std::vector<std::int64_t> labels(std::int64_t i) const;
  const Waveform& audio(std::int64_t i) const;  // clean
  const VideoClip& video(std::int64_t i) const;  // steps() frames at the feature rate
  // 25 fps source clip before resampling.
  VideoClip source_video(std::int64_t i) const;

  // Sum of three unrelated synthetic talkers, length samples_per_utterance().
  Waveform babble(std::uint64_t seed) const;
  // One unrelated synthetic utterance used as an overlapping talker.
  Waveform distractor(std::uint64_t seed) const;

  // Audio for sample i under `c`; noise draws are keyed by `noise_seed`.
  Waveform audio_under(std::int64_t i, const Condition& c, std::uint64_t noise_seed) const;

  // Feature batch for the given samples. `conds` is either empty (clean) or
  // one condition per sample.
  Batch batch(std::span<const std::int64_t> ids, std::span<const Condition> conds,
              std::uint64_t noise_seed, bool with_video) const;

 private:
  Waveform render_audio(const std::string& text, Rng& rng) const;
  VideoClip render_video(const std::string& text, Rng& rng) const;

  TaskConfig cfg_;
  Vocabulary vocab_;
  std::vector<std::string> transcripts_;
  mutable std::vector<std::optional<Waveform>> audio_cache_;
  mutable std::vector<std::optional<VideoClip>> video_cache_;
};

// ---------------------------------------------------------------------------

struct TrainConfig {
  std::uint64_t seed = 1;
  std::int64_t steps = 2000;
  std::int64_t batch_size = 4;
  LrSchedule schedule{2e-3, 100, 1200, 2000, 2e-4};
  AdamConfig adam{0.9, 0.999, 1e-8, 1.0};
  double noise_prob = 0.5;   // chance a training utterance gets babble
  double noise_snr_min = 0.0;
  double noise_snr_max = 20.0;
  std::int64_t eval_every = 50;  // training-set WER probe; 0 disables
  double target_wer = 0.0;        // stop once the probe falls below; 0 disables
  std::int64_t checkpoint_every = 0;

  static TrainConfig preset_named(const std::string& name);
  static const std::vector<std::string>& keys();
  static TrainConfig from(const KeyValues& kv);
  std::string to_text() const;
  void validate() const;
};

struct StepRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

// One JSON object per line: {"step":..,"loss":..,"lr":..,"grad_norm":..,"wall_ms":..}.
std::string to_json_line(const StepRecord& r);

struct TrainResult {
  std::vector<StepRecord> records;
  std::vector<std::pair<std::int64_t, double>> wer_probes;  // (step, training WER)
  std::int64_t steps_run = 0;
  bool reached_target = false;
};

struct TrainPaths {
  std::optional<std::filesystem::path> log;         // JSON lines, appended
  std::optional<std::filesystem::path> checkpoint;  // written at cadence and at the end
  std::optional<std::filesystem::path> dump_dir;    // divergence diagnostics
};

// Everything needed to resume: model parameters, Adam moments and the step.
Checkpoint snapshot(const AvModel& model, const Adam& opt, std::int64_t step,
                    const std::string& config_text);

// Mixed-source batches: each step draws its whole batch from `primary` or
// `secondary`; `secondary_fraction` is the per-step probability of the latter.
struct TaskMix {
  const SyntheticTask* primary = nullptr;
  const SyntheticTask* secondary = nullptr;
  double secondary_fraction = 0.0;
};

// Whether step `step` of a run seeded with `seed` draws from the secondary task.
bool mix_picks_secondary(std::uint64_t seed, std::int64_t step, double fraction);

class Trainer {
 public:
  Trainer(AvModel& model, TrainConfig cfg, std::string config_text);

  // Resumes parameters, optimizer state and step counter.
  void restore(const Checkpoint& ck);
  Checkpoint snapshot() const;

  std::int64_t step() const { return step_; }
  const TrainConfig& config() const { return cfg_; }

  // Ids and noise conditions of the batch for the current step.
  Batch next_batch(const SyntheticTask& task) const;
  // Forward, loss, backward and Adam update on `batch`; advances the step.
  StepRecord train_step(const Batch& batch);

  // Runs until cfg.steps (or the WER target) and returns the log.
  TrainResult run(const TaskMix& mix, const TrainPaths& paths = {});
  TrainResult run(const SyntheticTask& task, const TrainPaths& paths = {});

 private:
  AvModel& model_;
  TrainConfig cfg_;
  std::string config_text_;
  Adam opt_;
  std::int64_t step_ = 0;
};

// Corpus WER of greedy decoding over every sample of `task` under `c`.
double evaluate_wer(const AvModel& model, const SyntheticTask& task, const Condition& c,
                    std::uint64_t noise_seed = 7, std::int64_t batch_size = 8);

struct FinetuneSpec {
  std::int64_t steps = 10000;
  std::int64_t batch_size = 4096;
  LrSchedule schedule = LrSchedule::finetune();
  double mix = 0.5;  // fraction of batches from the fine-tuning task
};

// Continues training `model` on the 50/50 mix of `primary` and `extra`.
TrainResult finetune(AvModel& model, const SyntheticTask& primary, const SyntheticTask& extra,
                     const FinetuneSpec& spec, TrainConfig base, const TrainPaths& paths = {});

}  // namespace avvit
