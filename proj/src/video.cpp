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

#include "avvit/video.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "avvit/error.hpp"

namespace avvit {

std::int64_t RawVideo::num_frames() const {
  const std::int64_t frame_bytes = static_cast<std::int64_t>(width) * height * kChannels;
  return frame_bytes == 0 ? 0 : static_cast<std::int64_t>(rgb.size()) / frame_bytes;
}

Tensor normalize_rgb(std::span<const std::uint8_t> rgb, std::int64_t frames, std::int64_t height,
                     std::int64_t width) {
  if (static_cast<std::int64_t>(rgb.size()) != frames * height * width * kChannels) {
    throw DimensionError("RGB buffer size does not match " + std::to_string(frames) + " frames of " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  Tensor out({frames, height, width, kChannels});
  double* o = out.mutable_data();
  for (std::size_t i = 0; i < rgb.size(); ++i) o[i] = rgb[i] / 127.5 - 1.0;
  return out;
}

VideoClip to_clip(const RawVideo& raw) {
  if (raw.fps_num == 0 || raw.fps_den == 0) throw InputError("video frame rate must be positive");
  if (raw.num_frames() == 0) throw InputError("empty video");
  return {normalize_rgb(raw.rgb, raw.num_frames(), raw.height, raw.width), raw.fps()};
}

std::vector<std::int64_t> nearest_indices(std::int64_t in_frames, double fps, double target_rate,
                                          std::int64_t out_frames) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(out_frames));
  for (std::int64_t j = 0; j < out_frames; ++j) {
    const double t = static_cast<double>(j) / target_rate;
    // Candidates around t * fps; scan both neighbours so ties resolve to the
    // earlier frame.
    const auto guess = static_cast<std::int64_t>(std::floor(t * fps));
    std::int64_t best = -1;
    double best_d = 0.0;
    for (std::int64_t i = guess - 1; i <= guess + 1; ++i) {
      const std::int64_t c = std::clamp<std::int64_t>(i, 0, in_frames - 1);
      const double d = std::abs(static_cast<double>(c) / fps - t);
      if (best < 0 || d < best_d || (d == best_d && c < best)) {
        best = c;
        best_d = d;
      }
    }
    idx[j] = best;
  }
  return idx;
}

VideoClip resample_nn(const VideoClip& v, double target_rate,
                      std::optional<std::int64_t> out_frames) {
  if (!v.frames.defined() || v.frames.size() == 0) throw InputError("empty clip");
  if (!(v.fps > 0.0) || !(target_rate > 0.0)) throw InputError("frame rates must be positive");
  const std::int64_t in = v.num_frames();
  std::int64_t out = out_frames.value_or(std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::floor(in * target_rate / v.fps + 1e-9))));
  if (out < 1) throw InputError("resampled clip must have at least one frame");
  const auto idx = nearest_indices(in, v.fps, target_rate, out);
  const std::int64_t frame = v.frames.size() / in;
  Shape shape = v.frames.shape();
  shape[0] = out;
  Tensor res(shape);
  for (std::int64_t j = 0; j < out; ++j) {
    std::copy_n(v.frames.data() + idx[j] * frame, frame, res.mutable_data() + j * frame);
  }
  return {res, target_rate};
}

std::int64_t tubelet_offset(const TubeletConfig& cfg, std::int64_t h, std::int64_t w,
                            std::int64_t frame, std::int64_t channel) {
  return ((channel * cfg.frames + frame) * cfg.patch + w) * cfg.patch + h;
}

Tensor extract_tubelets(const VideoClip& v, const TubeletConfig& cfg) {
  const auto& s = v.frames.shape();
  if (s.size() != 4 || s[1] != kFrameSize || s[2] != kFrameSize || s[3] != kChannels) {
    throw DimensionError("tubelets need [T x 128 x 128 x 3] frames, got " + to_string(s));
  }
  if (cfg.patch <= 0 || kFrameSize % cfg.patch != 0 || cfg.frames <= 0) {
    throw ConfigError("tubelet patch must divide 128 and frames must be positive");
  }
  const std::int64_t steps = s[0];
  const std::int64_t grid = cfg.grid();
  const std::int64_t tokens = cfg.tokens_per_step();
  const std::int64_t dim = cfg.token_dim();
  Tensor out({steps, tokens, dim});
  const double* src = v.frames.data();
  double* dst = out.mutable_data();
  const std::int64_t row = kFrameSize * kChannels;
  const std::int64_t frame_size = kFrameSize * row;
  for (std::int64_t t = 0; t < steps; ++t) {
    for (std::int64_t f = 0; f < cfg.frames; ++f) {
      const std::int64_t tf = std::clamp<std::int64_t>(t + cfg.window_start() + f, 0, steps - 1);
      const double* fr = src + tf * frame_size;
      for (std::int64_t gy = 0; gy < grid; ++gy) {
        for (std::int64_t gx = 0; gx < grid; ++gx) {
          double* tok = dst + ((t * tokens) + gy * grid + gx) * dim;
          for (std::int64_t h = 0; h < cfg.patch; ++h) {
            const double* px = fr + (gy * cfg.patch + h) * row + gx * cfg.patch * kChannels;
            for (std::int64_t w = 0; w < cfg.patch; ++w) {
              for (std::int64_t c = 0; c < kChannels; ++c) {
                tok[tubelet_offset(cfg, h, w, f, c)] = px[w * kChannels + c];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'A', 'V', 'V', 'R'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated video header");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

RawVideo read_raw_video(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(path.string() + ": bad video magic");
  }
  if (get_u32(is) != kVersion) throw FormatError(path.string() + ": unsupported video version");
  RawVideo v;
  v.width = get_u32(is);
  v.height = get_u32(is);
  const std::uint32_t count = get_u32(is);
  v.fps_num = get_u32(is);
  v.fps_den = get_u32(is);
  if (v.fps_den == 0) throw FormatError(path.string() + ": zero fps denominator");
  v.rgb.resize(static_cast<std::size_t>(v.width) * v.height * kChannels * count);
  if (!is.read(reinterpret_cast<char*>(v.rgb.data()), static_cast<std::streamsize>(v.rgb.size()))) {
    throw FormatError(path.string() + ": truncated frame data");
  }
  return v;
}

void write_raw_video(const std::filesystem::path& path, const RawVideo& v) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, v.width);
  put_u32(os, v.height);
  put_u32(os, static_cast<std::uint32_t>(v.num_frames()));
  put_u32(os, v.fps_num);
  put_u32(os, v.fps_den);
  os.write(reinterpret_cast<const char*>(v.rgb.data()), static_cast<std::streamsize>(v.rgb.size()));
}

}  // namespace avvit
