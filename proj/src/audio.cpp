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

#include "avvit/audio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "avvit/error.hpp"

namespace avvit {

namespace {

void check_waveform(const Waveform& w) {
  if (w.sample_rate != kSampleRate) {
    throw InputError("expected " + std::to_string(kSampleRate) + " Hz audio, got " +
                     std::to_string(w.sample_rate));
  }
  for (double v : w.samples) {
    if (!std::isfinite(v)) throw InputError("waveform contains non-finite samples");
  }
}

}  // namespace

double Waveform::power() const {
  if (samples.empty()) return 0.0;
  double e = 0.0;
  for (double v : samples) e += v * v;
  return e / static_cast<double>(samples.size());
}

std::vector<double> hann_window(int length) {
  // Periodic form, as used for spectral analysis.
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(length));
  }
  return w;
}

Tensor frame_hann(const Waveform& w, const AudioConfig& cfg) {
  check_waveform(w);
  const auto len = static_cast<std::int64_t>(w.samples.size());
  if (len < cfg.window) {
    throw InputError("need at least " + std::to_string(cfg.window) + " samples, got " +
                     std::to_string(len));
  }
  const std::int64_t n = (len - cfg.window) / cfg.hop + 1;
  const auto win = hann_window(cfg.window);
  Tensor frames({n, cfg.window});
  double* out = frames.mutable_data();
  for (std::int64_t i = 0; i < n; ++i) {
    for (int j = 0; j < cfg.window; ++j) {
      out[i * cfg.window + j] = w.samples[i * cfg.hop + j] * win[j];
    }
  }
  return frames;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(const AudioConfig& cfg)
    : bins_(cfg.fft_size / 2 + 1), channels_(cfg.mel_channels) {
  if (cfg.mel_channels < 1) throw ConfigError("mel_channels must be positive");
  if (!(0.0 <= cfg.mel_low_hz && cfg.mel_low_hz < cfg.mel_high_hz &&
        cfg.mel_high_hz <= kSampleRate / 2.0)) {
    throw ConfigError("mel range must satisfy 0 <= low < high <= Nyquist");
  }
  const double lo = hz_to_mel(cfg.mel_low_hz);
  const double hi = hz_to_mel(cfg.mel_high_hz);
  const double spacing = (hi - lo) / (channels_ + 1);
  std::vector<double> edges(static_cast<std::size_t>(channels_ + 2));
  for (int i = 0; i < channels_ + 2; ++i) edges[i] = lo + spacing * i;
  for (int m = 0; m < channels_; ++m) center_hz_.push_back(mel_to_hz(edges[m + 1]));
  weights_.assign(static_cast<std::size_t>(bins_) * channels_, 0.0);
  const double hz_per_bin = static_cast<double>(kSampleRate) / cfg.fft_size;
  for (int k = 0; k < bins_; ++k) {
    const double mel = hz_to_mel(k * hz_per_bin);
    for (int m = 0; m < channels_; ++m) {
      const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
      double wgt = 0.0;
      if (mel > left && mel <= center) {
        wgt = (mel - left) / (center - left);
      } else if (mel > center && mel < right) {
        wgt = (right - mel) / (right - center);
      }
      // Area normalization so wide high-frequency filters do not dominate.
      const double width_hz = mel_to_hz(right) - mel_to_hz(left);
      weights_[static_cast<std::size_t>(k) * channels_ + m] = wgt * 2.0 / width_hz;
    }
  }
}

Tensor MelFilterbank::apply(const Tensor& spec) const {
  if (spec.rank() != 2 || spec.dim(1) != bins_) {
    throw DimensionError("mel filterbank expects [N x " + std::to_string(bins_) + "], got " +
                         to_string(spec.shape()));
  }
  const auto n = spec.dim(0);
  Tensor out({n, channels_});
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = spec.data() + i * bins_;
    double* o = out.mutable_data() + i * channels_;
    for (int k = 0; k < bins_; ++k) {
      if (row[k] == 0.0) continue;
      const double* wk = weights_.data() + static_cast<std::size_t>(k) * channels_;
      for (int m = 0; m < channels_; ++m) o[m] += row[k] * wk[m];
    }
  }
  return out;
}

Tensor power_spectrum(const Tensor& frames, int fft_size) {
  if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0) {
    throw ConfigError("fft_size must be a power of two");
  }
  if (frames.rank() != 2 || frames.dim(1) > fft_size) {
    throw DimensionError("frames must be [N x window] with window <= fft_size");
  }
  const auto n = frames.dim(0), width = frames.dim(1);
  const int bins = fft_size / 2 + 1;
  Tensor out({n, bins});
  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(fft_size));
  std::vector<std::complex<double>> spec;
  for (std::int64_t i = 0; i < n; ++i) {
    std::fill(buf.begin(), buf.end(), 0.0);
    std::copy_n(frames.data() + i * width, width, buf.begin());
    fft.fwd(spec, buf);
    for (int k = 0; k < bins; ++k) out.mutable_data()[i * bins + k] = std::norm(spec[k]);
  }
  return out;
}

Tensor mel_energies(const Tensor& frames, const AudioConfig& cfg) {
  return MelFilterbank(cfg).apply(power_spectrum(frames, cfg.fft_size));
}

Tensor log_mel80(const Tensor& frames, const AudioConfig& cfg) {
  Tensor mel = mel_energies(frames, cfg);
  for (double& v : mel.mutable_values()) v = std::log(std::max(v, cfg.log_floor));
  return mel;
}

AcousticFeatures stack3(const Tensor& x, const AudioConfig& cfg) {
  if (x.rank() != 2) throw DimensionError("stack3 expects [N x C]");
  const auto n = x.dim(0), c = x.dim(1);
  if (n < cfg.stack) {
    throw InputError("need at least " + std::to_string(cfg.stack) + " frames to stack, got " +
                     std::to_string(n));
  }
  const auto t = n / cfg.stack;
  const auto width = c * cfg.stack;
  std::vector<double> rows(x.values().begin(), x.values().begin() + t * width);
  return {Tensor({1, t, width}, std::move(rows))};
}

Tensor unstack3(const AcousticFeatures& f, const AudioConfig& cfg) {
  const auto t = f.data.dim(1), width = f.data.dim(2);
  if (f.data.dim(0) != 1 || width % cfg.stack != 0) {
    throw DimensionError("unstack3 expects [1 x T x stack*C]");
  }
  return f.data.reshaped({t * cfg.stack, width / cfg.stack});
}

AcousticFeatures compute_features(const Waveform& w, const AudioConfig& cfg) {
  return stack3(log_mel80(frame_hann(w, cfg), cfg), cfg);
}

std::int64_t feature_steps(std::int64_t num_samples, const AudioConfig& cfg) {
  if (num_samples < cfg.window) return 0;
  return ((num_samples - cfg.window) / cfg.hop + 1) / cfg.stack;
}

Waveform fit_length(const Waveform& noise, std::size_t length) {
  if (noise.samples.empty()) throw InputError("empty noise waveform");
  Waveform out;
  out.sample_rate = noise.sample_rate;
  out.samples.resize(length);
  for (std::size_t i = 0; i < length; ++i) out.samples[i] = noise.samples[i % noise.samples.size()];
  return out;
}

double noise_gain_for_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  check_waveform(clean);
  check_waveform(noise);
  const Waveform fitted = fit_length(noise, clean.samples.size());
  const double pc = clean.power();
  const double pn = fitted.power();
  if (pc <= 0.0) throw InputError("clean signal has zero power");
  if (pn <= 0.0) throw InputError("noise signal has zero power");
  return std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  const double gain = noise_gain_for_snr(clean, noise, snr_db);
  const Waveform fitted = fit_length(noise, clean.samples.size());
  Waveform out = clean;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += gain * fitted.samples[i];
  return out;
}

Waveform overlap_utterance(const Waveform& base, const Waveform& distractor, bool at_start) {
  check_waveform(base);
  check_waveform(distractor);
  if (distractor.duration_s() >= kMaxDistractorSeconds) {
    throw InputError("overlapping utterance must be shorter than 5 s");
  }
  if (distractor.samples.size() > base.samples.size()) {
    throw InputError("overlapping utterance is longer than the base utterance");
  }
  Waveform out = base;
  const std::size_t offset = at_start ? 0 : base.samples.size() - distractor.samples.size();
  for (std::size_t i = 0; i < distractor.samples.size(); ++i) {
    out.samples[offset + i] += distractor.samples[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// WAV

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
void put_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(path.string() + ": not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = read_u32(bytes.data() + pos + 4);
    const unsigned char* body = bytes.data() + pos + 8;
    if (pos + 8 + size > bytes.size()) throw FormatError(path.string() + ": truncated chunk");
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError(path.string() + ": short fmt chunk");
      const auto format = read_u16(body);
      const auto channels = read_u16(body + 2);
      const auto rate = read_u32(body + 4);
      const auto bits = read_u16(body + 14);
      if (format != 1 || channels != 1 || bits != 16) {
        throw FormatError(path.string() + ": only mono 16-bit PCM is supported");
      }
      if (rate != kSampleRate) {
        throw InputError(path.string() + ": sample rate " + std::to_string(rate) +
                         ", expected 16000");
      }
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(path.string() + ": data chunk before fmt chunk");
      Waveform w;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(body + 2 * i));
        w.samples[i] = raw / 32768.0;
      }
      return w;
    }
    pos += 8 + size + (size & 1);
  }
  throw FormatError(path.string() + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  check_waveform(w);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  put_u32(os, 16);
  put_u16(os, 1);
  put_u16(os, 1);
  put_u32(os, kSampleRate);
  put_u32(os, kSampleRate * 2);
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data_bytes);
  for (double v : w.samples) {
    const double clamped = std::clamp(v, -1.0, 32767.0 / 32768.0);
    put_u16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clamped * 32768.0))));
  }
}

}  // namespace avvit
