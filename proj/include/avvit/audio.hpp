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
#include <span>
#include <vector>

#include "avvit/tensor.hpp"

namespace avvit {

inline constexpr int kSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
  // Mean squared amplitude over the whole clip.
  double power() const;
};

// Framing and filterbank parameters. The defaults are the 25 ms / 10 ms,
// 80-channel setup; FFT size, mel range and log floor are choices.
struct AudioConfig {
  int window = 400;
  int hop = 160;
  int fft_size = 512;
  int mel_channels = 80;
  double mel_low_hz = 125.0;
  double mel_high_hz = 7500.0;
  double log_floor = 1e-10;
  int stack = 3;

  int feature_dim() const { return mel_channels * stack; }
};

// data is [B x T x (mel_channels * stack)]; one row per 30 ms.
struct AcousticFeatures {
  static constexpr double kFramePeriodMs = 30.0;
  Tensor data;
};

std::vector<double> hann_window(int length);

// [N x window] Hann-weighted frames at hop spacing; a trailing partial frame
// is dropped.
Tensor frame_hann(const Waveform& w, const AudioConfig& cfg = {});

// Triangular filters on the HTK mel scale, applied to a power spectrum.
class MelFilterbank {
 public:
  explicit MelFilterbank(const AudioConfig& cfg = {});

  // Bin energies [N x (fft_size/2 + 1)] -> mel energies [N x channels].
  Tensor apply(const Tensor& power_spectrum) const;
  const std::vector<double>& center_hz() const { return center_hz_; }
  int bins() const { return bins_; }

 private:
  int bins_;
  int channels_;
  std::vector<double> weights_;  // [bins x channels]
  std::vector<double> center_hz_;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// |FFT|^2 of each zero-padded frame: [N x window] -> [N x (fft_size/2 + 1)].
Tensor power_spectrum(const Tensor& frames, int fft_size);
// Linear mel energies (before the log).
Tensor mel_energies(const Tensor& frames, const AudioConfig& cfg = {});
// log(max(mel energy, floor)): [N x window] -> [N x mel_channels].
Tensor log_mel80(const Tensor& frames, const AudioConfig& cfg = {});

// Concatenates groups of `cfg.stack` consecutive rows: [N x C] -> [1 x N/3 x 3C].
AcousticFeatures stack3(const Tensor& x, const AudioConfig& cfg = {});
// Inverse of stack3 for the retained rows: [1 x T x 3C] -> [3T x C].
Tensor unstack3(const AcousticFeatures& f, const AudioConfig& cfg = {});

AcousticFeatures compute_features(const Waveform& w, const AudioConfig& cfg = {});
// Number of 30 ms feature rows produced for `num_samples` samples.
std::int64_t feature_steps(std::int64_t num_samples, const AudioConfig& cfg = {});

// Gain applied to `noise` (tiled or cropped to the clean length) so the mix
// has the requested full-clip SNR.
double noise_gain_for_snr(const Waveform& clean, const Waveform& noise, double snr_db);
Waveform fit_length(const Waveform& noise, std::size_t length);
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

inline constexpr double kMaxDistractorSeconds = 5.0;
// Adds `distractor` at unity gain over the first (or last) samples of `base`.
Waveform overlap_utterance(const Waveform& base, const Waveform& distractor, bool at_start);

// Mono 16-bit PCM RIFF/WAVE at 16 kHz.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace avvit
