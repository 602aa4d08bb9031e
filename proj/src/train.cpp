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

#include "avvit/train.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "avvit/error.hpp"
#include "avvit/graph.hpp"
#include "avvit/ops.hpp"
#include "avvit/text.hpp"

namespace avvit {

namespace {

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

constexpr std::uint64_t kSaltBatch = 1;
constexpr std::uint64_t kSaltNoise = 2;
constexpr std::uint64_t kSaltMix = 3;
constexpr std::uint64_t kSaltSample = 4;
constexpr std::uint64_t kSaltTranscript = 5;

}  // namespace

// ---------------------------------------------------------------------------

double LrSchedule::lr_at(double step) const {
  if (step < 0) throw InputError("learning-rate step must be non-negative");
  if (step < warmup) return base * (step / warmup);
  if (step <= constant_until) return base;
  if (step >= anneal_until) return final_lr;
  return base * std::pow(final_lr / base, (step - constant_until) / (anneal_until - constant_until));
}

void LrSchedule::validate() const {
  if (!(base > 0) || !(final_lr > 0)) throw ConfigError("learning rates must be positive");
  if (warmup < 0 || constant_until < warmup || anneal_until <= constant_until) {
    throw ConfigError("schedule needs 0 <= warmup <= constant_until < anneal_until");
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(salt)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// ---------------------------------------------------------------------------

Adam::Adam(ParamStore& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
  for (const auto& [name, t] : params_.entries()) {
    m_.emplace_back(t.shape());
    v_.emplace_back(t.shape());
  }
}

double Adam::update(double lr, std::int64_t step) {
  const auto& entries = params_.entries();
  double sq = 0.0;
  for (const auto& [name, t] : entries) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) {
      if (!std::isfinite(g)) {
        throw TrainingError("non-finite gradient in " + name + " at step " + std::to_string(step));
      }
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  const double clip = (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor p = entries[i].second;
    auto w = p.mutable_values();
    auto m = m_[i].mutable_values();
    auto v = v_[i].mutable_values();
    const bool has = p.has_grad();
    const auto g = has ? p.grad() : std::span<const double>{};
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has ? g[j] * clip : 0.0;
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
  return norm;
}

void Adam::save(Checkpoint& ck) const {
  const auto& entries = params_.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ck.blobs.emplace_back("adam.m/" + entries[i].first, m_[i]);
    ck.blobs.emplace_back("adam.v/" + entries[i].first, v_[i]);
  }
  ck.blobs.emplace_back("adam.t", Tensor::scalar(static_cast<double>(t_)));
}

void Adam::restore(const Checkpoint& ck) {
  const auto& entries = params_.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (auto [prefix, dst] : {std::pair{"adam.m/", &m_[i]}, std::pair{"adam.v/", &v_[i]}}) {
      const Tensor& src = ck.blob(prefix + entries[i].first);
      if (src.shape() != dst->shape()) throw FormatError("optimizer state shape mismatch");
      std::copy(src.values().begin(), src.values().end(), dst->mutable_values().begin());
    }
  }
  t_ = static_cast<std::int64_t>(ck.blob("adam.t").item());
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& TaskConfig::keys() {
  static const std::vector<std::string> k{"task_seed",  "task_classes",          "task_samples",
                                          "task_words", "task_chars_per_word",   "task_steps_per_symbol",
                                          "task_video_only"};
  return k;
}

TaskConfig TaskConfig::from(const KeyValues& kv, TaskConfig c) {
  if (kv.has("task_seed")) c.seed = static_cast<std::uint64_t>(kv.get_int("task_seed"));
  if (kv.has("task_classes")) c.classes = static_cast<int>(kv.get_int("task_classes"));
  if (kv.has("task_samples")) c.samples = kv.get_int("task_samples");
  if (kv.has("task_words")) c.words = static_cast<int>(kv.get_int("task_words"));
  if (kv.has("task_chars_per_word")) c.chars_per_word = static_cast<int>(kv.get_int("task_chars_per_word"));
  if (kv.has("task_steps_per_symbol")) {
    c.steps_per_symbol = static_cast<int>(kv.get_int("task_steps_per_symbol"));
  }
  if (kv.has("task_video_only")) c.video_only = kv.get_bool("task_video_only");
  c.validate();
  return c;
}

std::string TaskConfig::to_text() const {
  std::ostringstream os;
  os << "task_seed = " << seed << '\n'
     << "task_classes = " << classes << '\n'
     << "task_samples = " << samples << '\n'
     << "task_words = " << words << '\n'
     << "task_chars_per_word = " << chars_per_word << '\n'
     << "task_steps_per_symbol = " << steps_per_symbol << '\n'
     << "task_video_only = " << (video_only ? "true" : "false") << '\n';
  return os.str();
}

void TaskConfig::validate() const {
  if (classes < 2 || classes > 26) throw ConfigError("task_classes must be in [2, 26]");
  if (samples < 1) throw ConfigError("task_samples must be positive");
  if (words < 1 || chars_per_word < 1 || steps_per_symbol < 1) {
    throw ConfigError("task word, character and duration counts must be positive");
  }
  const std::int64_t symbols = static_cast<std::int64_t>(words) * (chars_per_word + 1) - 1;
  if (symbols * steps_per_symbol > kMaxClipFrames) {
    throw ConfigError("synthetic utterances would exceed " + std::to_string(kMaxClipFrames) +
                      " frames");
  }
}

std::string Condition::label() const {
  switch (kind) {
    case Kind::kClean:
      return "∞dB";
    case Kind::kSnr:
      return fmt(snr_db) + "dB";
    case Kind::kOverlap:
      return "overlap";
  }
  return "?";
}

std::vector<Condition> Condition::grid() {
  return {clean(), snr(20), snr(10), snr(0), overlap()};
}

// ---------------------------------------------------------------------------

namespace {

// Tone for letter class k: mel-spaced between 300 Hz and 3 kHz.
double tone_hz(int k, int classes) {
  const double lo = hz_to_mel(300.0), hi = hz_to_mel(3000.0);
  return mel_to_hz(lo + (hi - lo) * k / std::max(1, classes - 1));
}

std::string random_transcript(Rng& rng, int classes, int words, int chars) {
  std::string s;
  for (int w = 0; w < words; ++w) {
    if (w) s += ' ';
    for (int c = 0; c < chars; ++c) s += static_cast<char>('a' + rng.uniform_int(0, classes - 1));
  }
  return s;
}

}  // namespace

SyntheticTask::SyntheticTask(TaskConfig cfg)
    : cfg_(cfg), vocab_(Vocabulary::characters()) {
  cfg_.validate();
  transcripts_.reserve(static_cast<std::size_t>(cfg_.samples));
  for (std::int64_t i = 0; i < cfg_.samples; ++i) {
    Rng rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(i), kSaltTranscript));
    transcripts_.push_back(random_transcript(rng, cfg_.classes, cfg_.words, cfg_.chars_per_word));
  }
  audio_cache_.resize(transcripts_.size());
  video_cache_.resize(transcripts_.size());
}

std::int64_t SyntheticTask::symbols() const {
  return static_cast<std::int64_t>(cfg_.words) * (cfg_.chars_per_word + 1) - 1;
}

std::int64_t SyntheticTask::steps() const { return symbols() * cfg_.steps_per_symbol; }

std::int64_t SyntheticTask::samples_per_utterance() const {
  const AudioConfig a;
  return static_cast<std::int64_t>(a.hop) * a.stack * steps() + (a.window - a.hop);
}

const std::string& SyntheticTask::transcript(std::int64_t i) const {
  if (i < 0 || i >= size()) throw InputError("sample index out of range");
  return transcripts_[static_cast<std::size_t>(i)];
}

std::vector<std::int64_t> SyntheticTask::labels(std::int64_t i) const {
  return vocab_.encode(transcript(i));
}

Waveform SyntheticTask::render_audio(const std::string& text, Rng& rng) const {
  const AudioConfig a;
  const std::int64_t seg = static_cast<std::int64_t>(a.hop) * a.stack * cfg_.steps_per_symbol;
  Waveform w;
  w.samples.assign(static_cast<std::size_t>(samples_per_utterance()), 0.0);
  for (std::size_t j = 0; j < text.size(); ++j) {
    if (text[j] == ' ') continue;
    const double hz = tone_hz(text[j] - 'a', cfg_.classes);
    const double amp = 0.3 * rng.uniform(0.8, 1.2);
    const double phase = rng.uniform(0.0, 2 * std::numbers::pi);
    for (std::int64_t n = 0; n < seg; ++n) {
      const auto idx = static_cast<std::size_t>(static_cast<std::int64_t>(j) * seg + n);
      if (idx >= w.samples.size()) break;
      w.samples[idx] += amp * std::sin(2 * std::numbers::pi * hz * n / kSampleRate + phase);
    }
  }
  for (double& s : w.samples) s += rng.normal(0.003);
  return w;
}

VideoClip SyntheticTask::render_video(const std::string& text, Rng& rng) const {
  const double sym_s = 0.030 * cfg_.steps_per_symbol;
  const double dur_s = sym_s * static_cast<double>(text.size());
  const auto frames = static_cast<std::int64_t>(std::ceil(dur_s * kSourceFps - 1e-9));
  const std::int64_t n = kFrameSize;
  Tensor clip({frames, n, n, kChannels});
  auto v = clip.mutable_values();
  const double brightness = rng.uniform(-0.1, 0.1);
  const double offset = rng.uniform(0.0, 64.0);
  for (std::int64_t f = 0; f < frames; ++f) {
    const double t_mid = (static_cast<double>(f) + 0.5) / kSourceFps;
    const auto sym = std::min<std::size_t>(static_cast<std::size_t>(t_mid / sym_s), text.size() - 1);
    const char ch = text[sym];
    double* px = v.data() + f * n * n * kChannels;
    if (ch == ' ') {
      for (std::int64_t i = 0; i < n * n * kChannels; ++i) px[i] = brightness;
      continue;
    }
    // Class k: orientation k % 2, period 8 << ((k / 2) % 4), tinted channel k % 3;
    // the pattern drifts 3 px per frame.
    const int k = ch - 'a';
    const double period = static_cast<double>(8 << ((k / 2) % 4));
    const bool vertical = k % 2 == 1;
    const int tint = k % 3;
    for (std::int64_t y = 0; y < n; ++y) {
      for (std::int64_t x = 0; x < n; ++x) {
        const double pos = static_cast<double>(vertical ? x : y) + offset + 3.0 * f;
        const double s = 0.8 * std::sin(2 * std::numbers::pi * pos / period);
        for (int c = 0; c < kChannels; ++c) {
          px[(y * n + x) * kChannels + c] = brightness + (c == tint ? s : 0.3 * s);
        }
      }
    }
  }
  VideoClip out;
  out.frames = clip;
  out.fps = kSourceFps;
  return out;
}

const Waveform& SyntheticTask::audio(std::int64_t i) const {
  auto& slot = audio_cache_[static_cast<std::size_t>((void)transcript(i), i)];
  if (!slot) {
    if (cfg_.video_only) {
      Waveform w;
      w.samples.assign(static_cast<std::size_t>(samples_per_utterance()), 0.0);
      slot = std::move(w);
    } else {
      Rng rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(i), kSaltSample));
      slot = render_audio(transcript(i), rng);
    }
  }
  return *slot;
}

VideoClip SyntheticTask::source_video(std::int64_t i) const {
  Rng rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(i), kSaltSample + 100));
  return render_video(transcript(i), rng);
}

const VideoClip& SyntheticTask::video(std::int64_t i) const {
  auto& slot = video_cache_[static_cast<std::size_t>((void)transcript(i), i)];
  if (!slot) slot = resample_nn(source_video(i), kFeatureRate, steps());
  return *slot;
}

Waveform SyntheticTask::babble(std::uint64_t seed) const {
  Rng rng(seed);
  Waveform sum;
  sum.samples.assign(static_cast<std::size_t>(samples_per_utterance()), 0.0);
  for (int talker = 0; talker < 3; ++talker) {
    const auto text = random_transcript(rng, cfg_.classes, cfg_.words, cfg_.chars_per_word);
    const Waveform w = render_audio(text, rng);
    const auto shift = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(w.samples.size()) - 1));
    for (std::size_t n = 0; n < sum.samples.size(); ++n) {
      sum.samples[n] += w.samples[(n + shift) % w.samples.size()];
    }
  }
  return sum;
}

Waveform SyntheticTask::distractor(std::uint64_t seed) const {
  Rng rng(seed);
  const auto text = random_transcript(rng, cfg_.classes, 1, cfg_.chars_per_word);
  Waveform w = render_audio(text, rng);
  const AudioConfig a;
  w.samples.resize(static_cast<std::size_t>(a.hop) * a.stack * cfg_.steps_per_symbol *
                   cfg_.chars_per_word);
  return w;
}

Waveform SyntheticTask::audio_under(std::int64_t i, const Condition& c,
                                    std::uint64_t noise_seed) const {
  const Waveform& clean = audio(i);
  // A silent (video-only) channel stays silent: there is no speech to mask.
  if (c.kind == Condition::Kind::kClean || cfg_.video_only) return clean;
  const auto seed = derive_seed(noise_seed, static_cast<std::uint64_t>(i), kSaltNoise);
  if (c.kind == Condition::Kind::kSnr) return mix_at_snr(clean, babble(seed), c.snr_db);
  return overlap_utterance(clean, distractor(seed), true);
}

Batch SyntheticTask::batch(std::span<const std::int64_t> ids, std::span<const Condition> conds,
                           std::uint64_t noise_seed, bool with_video) const {
  if (!conds.empty() && conds.size() != ids.size()) {
    throw InputError("need one condition per batch element");
  }
  const auto b = static_cast<std::int64_t>(ids.size());
  const auto t = steps();
  Batch out;
  out.audio = Tensor({b, t, kAudioDim});
  if (with_video) out.video = Tensor({b, t, kFrameSize, kFrameSize, kChannels});
  const std::int64_t vframe = t * kFrameSize * kFrameSize * kChannels;
  for (std::int64_t k = 0; k < b; ++k) {
    const auto i = ids[static_cast<std::size_t>(k)];
    const Condition c = conds.empty() ? Condition::clean() : conds[static_cast<std::size_t>(k)];
    const Tensor feats = compute_features(audio_under(i, c, noise_seed)).data;
    if (feats.dim(1) != t) throw ContractError("synthetic audio does not yield the expected steps");
    // Utterance-level standardization; a silent channel maps to all zeros.
    const auto fv = feats.values();
    const double n = static_cast<double>(fv.size());
    const double mu = std::accumulate(fv.begin(), fv.end(), 0.0) / n;
    double var = 0.0;
    for (double x : fv) var += (x - mu) * (x - mu);
    const double sd = std::sqrt(var / n);
    const double inv = sd > 1e-9 ? 1.0 / sd : 0.0;
    std::transform(fv.begin(), fv.end(), out.audio.mutable_values().begin() + k * t * kAudioDim,
                   [&](double x) { return (x - mu) * inv; });
    if (with_video) {
      const auto frames = video(i).frames.values();
      std::copy(frames.begin(), frames.end(), out.video.mutable_values().begin() + k * vframe);
    }
    out.labels.push_back(labels(i));
    out.transcripts.push_back(transcript(i));
  }
  return out;
}

// ---------------------------------------------------------------------------

TrainConfig TrainConfig::preset_named(const std::string& name) {
  TrainConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.steps = 300000;
    c.batch_size = 1024;
    c.schedule = LrSchedule::paper();
    c.adam.clip_norm = 0.0;
    c.noise_prob = 0.0;
    c.eval_every = 0;
    c.checkpoint_every = 10000;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
}

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k{
      "seed",          "steps",         "batch_size",    "lr_base",     "lr_warmup",
      "lr_constant_until", "lr_anneal_until", "lr_final", "adam_beta1", "adam_beta2",
      "adam_eps",      "clip_norm",     "noise_prob",    "noise_snr_min", "noise_snr_max",
      "eval_every",    "target_wer",    "checkpoint_every"};
  return k;
}

TrainConfig TrainConfig::from(const KeyValues& kv) {
  TrainConfig c = preset_named(kv.has("preset") ? kv.get("preset") : "desk");
  auto num = [&](const char* key, double& field) {
    if (kv.has(key)) field = kv.get_double(key);
  };
  auto integer = [&](const char* key, std::int64_t& field) {
    if (kv.has(key)) field = kv.get_int(key);
  };
  if (kv.has("seed")) c.seed = static_cast<std::uint64_t>(kv.get_int("seed"));
  integer("steps", c.steps);
  integer("batch_size", c.batch_size);
  num("lr_base", c.schedule.base);
  num("lr_warmup", c.schedule.warmup);
  num("lr_constant_until", c.schedule.constant_until);
  num("lr_anneal_until", c.schedule.anneal_until);
  num("lr_final", c.schedule.final_lr);
  num("adam_beta1", c.adam.beta1);
  num("adam_beta2", c.adam.beta2);
  num("adam_eps", c.adam.eps);
  num("clip_norm", c.adam.clip_norm);
  num("noise_prob", c.noise_prob);
  num("noise_snr_min", c.noise_snr_min);
  num("noise_snr_max", c.noise_snr_max);
  integer("eval_every", c.eval_every);
  num("target_wer", c.target_wer);
  integer("checkpoint_every", c.checkpoint_every);
  c.validate();
  return c;
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "seed = " << seed << '\n'
     << "steps = " << steps << '\n'
     << "batch_size = " << batch_size << '\n'
     << "lr_base = " << fmt(schedule.base) << '\n'
     << "lr_warmup = " << fmt(schedule.warmup) << '\n'
     << "lr_constant_until = " << fmt(schedule.constant_until) << '\n'
     << "lr_anneal_until = " << fmt(schedule.anneal_until) << '\n'
     << "lr_final = " << fmt(schedule.final_lr) << '\n'
     << "adam_beta1 = " << fmt(adam.beta1) << '\n'
     << "adam_beta2 = " << fmt(adam.beta2) << '\n'
     << "adam_eps = " << fmt(adam.eps) << '\n'
     << "clip_norm = " << fmt(adam.clip_norm) << '\n'
     << "noise_prob = " << fmt(noise_prob) << '\n'
     << "noise_snr_min = " << fmt(noise_snr_min) << '\n'
     << "noise_snr_max = " << fmt(noise_snr_max) << '\n'
     << "eval_every = " << eval_every << '\n'
     << "target_wer = " << fmt(target_wer) << '\n'
     << "checkpoint_every = " << checkpoint_every << '\n';
  return os.str();
}

void TrainConfig::validate() const {
  schedule.validate();
  if (steps < 0 || batch_size < 1) throw ConfigError("steps must be >= 0 and batch_size >= 1");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1 && adam.eps > 0)) {
    throw ConfigError("Adam betas must lie in [0, 1) and eps must be positive");
  }
  if (adam.clip_norm < 0) throw ConfigError("clip_norm must be >= 0");
  if (noise_prob < 0 || noise_prob > 1) throw ConfigError("noise_prob must lie in [0, 1]");
  if (noise_snr_min > noise_snr_max) throw ConfigError("noise_snr_min exceeds noise_snr_max");
  if (eval_every < 0 || checkpoint_every < 0) throw ConfigError("cadences must be >= 0");
}

std::string to_json_line(const StepRecord& r) {
  std::ostringstream os;
  os << "{\"step\":" << r.step << ",\"loss\":" << fmt(r.loss) << ",\"lr\":" << fmt(r.lr)
     << ",\"grad_norm\":" << fmt(r.grad_norm) << ",\"wall_ms\":" << fmt(std::round(r.wall_ms * 1000) / 1000)
     << "}";
  return os.str();
}

Checkpoint snapshot(const AvModel& model, const Adam& opt, std::int64_t step,
                    const std::string& config_text) {
  Checkpoint ck;
  ck.config_text = config_text;
  ck.step = step;
  for (const auto& [name, t] : model.params().entries()) ck.blobs.emplace_back(name, t);
  opt.save(ck);
  return ck;
}

bool mix_picks_secondary(std::uint64_t seed, std::int64_t step, double fraction) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(step), kSaltMix));
  return rng.uniform() < fraction;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(AvModel& model, TrainConfig cfg, std::string config_text)
    : model_(model), cfg_(cfg), config_text_(std::move(config_text)), opt_(model.params(), cfg.adam) {
  cfg_.validate();
  for (const auto& [name, t] : model_.params().entries()) {
    Tensor p = t;
    p.set_requires_grad(true);
  }
}

void Trainer::restore(const Checkpoint& ck) {
  load_params(model_.params(), ck);
  opt_.restore(ck);
  step_ = ck.step;
}

Checkpoint Trainer::snapshot() const { return avvit::snapshot(model_, opt_, step_, config_text_); }

Batch Trainer::next_batch(const SyntheticTask& task) const {
  Rng rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(step_), kSaltBatch));
  std::vector<std::int64_t> order(static_cast<std::size_t>(task.size()));
  std::iota(order.begin(), order.end(), 0);
  const auto b = std::min<std::int64_t>(cfg_.batch_size, task.size());
  // Partial Fisher-Yates: the first b entries are a uniform sample without replacement.
  for (std::int64_t k = 0; k < b; ++k) {
    std::swap(order[static_cast<std::size_t>(k)],
              order[static_cast<std::size_t>(rng.uniform_int(k, task.size() - 1))]);
  }
  order.resize(static_cast<std::size_t>(b));
  std::vector<Condition> conds;
  for (std::int64_t k = 0; k < b; ++k) {
    if (rng.uniform() < cfg_.noise_prob) {
      conds.push_back(Condition::snr(rng.uniform(cfg_.noise_snr_min, cfg_.noise_snr_max)));
    } else {
      conds.push_back(Condition::clean());
    }
  }
  return task.batch(order, conds, derive_seed(cfg_.seed, static_cast<std::uint64_t>(step_), kSaltNoise),
                    model_.config().front_end != FrontEnd::kAudioOnly);
}

StepRecord Trainer::train_step(const Batch& batch) {
  const auto t0 = std::chrono::steady_clock::now();
  StepRecord rec;
  rec.step = step_;
  rec.lr = cfg_.schedule.lr_at(static_cast<double>(step_));
  model_.params().zero_grad();
  Graph g;
  {
    GraphScope scope(g);
    Tensor loss;
    try {
      loss = model_.loss(batch);
    } catch (const NumericError& e) {
      throw TrainingError("non-finite value in the forward pass at step " + std::to_string(step_) +
                          ": " + e.what());
    }
    rec.loss = loss.item();
    if (!std::isfinite(rec.loss)) {
      throw TrainingError("loss diverged at step " + std::to_string(step_));
    }
    backward(g, loss);
  }
  g.clear();
  rec.grad_norm = opt_.update(rec.lr, step_);
  ++step_;
  rec.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

TrainResult Trainer::run(const SyntheticTask& task, const TrainPaths& paths) {
  return run(TaskMix{&task, nullptr, 0.0}, paths);
}

TrainResult Trainer::run(const TaskMix& mix, const TrainPaths& paths) {
  if (mix.primary == nullptr) throw InputError("training needs a task");
  std::ofstream log;
  if (paths.log) {
    log.open(*paths.log, std::ios::app);
    if (!log) throw InputError("cannot open training log " + paths.log->string());
  }
  auto save = [&] {
    if (paths.checkpoint) write_checkpoint(*paths.checkpoint, snapshot());
  };
  TrainResult res;
  while (step_ < cfg_.steps) {
    const bool secondary =
        mix.secondary != nullptr && mix_picks_secondary(cfg_.seed, step_, mix.secondary_fraction);
    const SyntheticTask& task = secondary ? *mix.secondary : *mix.primary;
    StepRecord rec;
    try {
      rec = train_step(next_batch(task));
    } catch (const TrainingError& e) {
      if (paths.dump_dir) {
        std::filesystem::create_directories(*paths.dump_dir);
        std::ofstream dump(*paths.dump_dir / "divergence.txt");
        dump << "error: " << e.what() << "\nstep: " << step_
             << "\nlr: " << fmt(cfg_.schedule.lr_at(static_cast<double>(step_))) << "\n";
        for (const auto& r : res.records) dump << to_json_line(r) << '\n';
        write_checkpoint(*paths.dump_dir / "divergence.ckpt", snapshot());
      }
      throw;
    }
    res.records.push_back(rec);
    if (log) log << to_json_line(rec) << '\n' << std::flush;
    ++res.steps_run;
    if (cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0) save();
    if (cfg_.eval_every > 0 && (step_ % cfg_.eval_every == 0 || step_ == cfg_.steps)) {
      const double w = evaluate_wer(model_, *mix.primary, Condition::clean());
      res.wer_probes.emplace_back(step_, w);
      if (cfg_.target_wer > 0 && w < cfg_.target_wer) {
        res.reached_target = true;
        break;
      }
    }
  }
  save();
  return res;
}

double evaluate_wer(const AvModel& model, const SyntheticTask& task, const Condition& c,
                    std::uint64_t noise_seed, std::int64_t batch_size) {
  const bool with_video = model.config().front_end != FrontEnd::kAudioOnly;
  std::vector<std::string> refs, hyps;
  for (std::int64_t start = 0; start < task.size(); start += batch_size) {
    std::vector<std::int64_t> ids;
    std::vector<Condition> conds;
    for (std::int64_t i = start; i < std::min(task.size(), start + batch_size); ++i) {
      ids.push_back(i);
      conds.push_back(c);
    }
    const Batch b = task.batch(ids, conds, noise_seed, with_video);
    const auto out = model.decode(b);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      refs.push_back(b.transcripts[k]);
      hyps.push_back(task.vocabulary().decode(out[k].labels));
    }
  }
  return corpus_wer(refs, hyps);
}

TrainResult finetune(AvModel& model, const SyntheticTask& primary, const SyntheticTask& extra,
                     const FinetuneSpec& spec, TrainConfig base, const TrainPaths& paths) {
  if (spec.mix < 0 || spec.mix > 1) throw ConfigError("fine-tuning mix must lie in [0, 1]");
  base.steps = spec.steps;
  base.batch_size = spec.batch_size;
  base.schedule = spec.schedule;
  Trainer trainer(model, base, model.config().to_text() + base.to_text());
  return trainer.run(TaskMix{&primary, &extra, spec.mix}, paths);
}

}  // namespace avvit
