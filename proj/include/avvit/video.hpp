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
#include <vector>

#include "avvit/tensor.hpp"

namespace avvit {

inline constexpr std::int64_t kFrameSize = 128;
inline constexpr std::int64_t kChannels = 3;
// Acoustic feature rate: one step every 30 ms.
inline constexpr double kFeatureRate = 1000.0 / 30.0;

// Mouth-track video. frames is [T x 128 x 128 x 3]; values are in [-1, 1]
// once normalized.
struct VideoClip {
  Tensor frames;
  double fps = kFeatureRate;

  std::int64_t num_frames() const { return frames.dim(0); }
};

// Byte-valued RGB24 frames as stored in the raw video container.
struct RawVideo {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t fps_num = 0;
  std::uint32_t fps_den = 1;
  std::vector<std::uint8_t> rgb;  // frame-major, then row, column, channel

  std::int64_t num_frames() const;
  double fps() const { return static_cast<double>(fps_num) / fps_den; }
};

// x / 127.5 - 1, mapping bytes onto [-1, 1].
Tensor normalize_rgb(std::span<const std::uint8_t> rgb, std::int64_t frames, std::int64_t height,
                     std::int64_t width);
VideoClip to_clip(const RawVideo& raw);

// Nearest-neighbour resampling in time: output frame j copies input frame
// argmin_i |i/fps - j/target_rate|, ties going to the earlier frame. The
// output length defaults to floor(T * target / fps) (at least 1); pass
// `out_frames` to synchronize with a known feature count.
VideoClip resample_nn(const VideoClip& v, double target_rate,
                      std::optional<std::int64_t> out_frames = std::nullopt);
std::vector<std::int64_t> nearest_indices(std::int64_t in_frames, double fps, double target_rate,
                                          std::int64_t out_frames);

enum class TubeletAlignment {
  kCentered,  // window [t-3, t+4]
  kCausal,    // window [t-7, t]
};

struct TubeletConfig {
  std::int64_t patch = 32;
  std::int64_t frames = 8;
  TubeletAlignment alignment = TubeletAlignment::kCentered;

  std::int64_t grid() const { return kFrameSize / patch; }
  std::int64_t tokens_per_step() const { return grid() * grid(); }
  std::int64_t token_dim() const { return patch * patch * frames * kChannels; }
  // Offset of the first window frame relative to t.
  std::int64_t window_start() const {
    return alignment == TubeletAlignment::kCentered ? -(frames / 2 - 1) : -(frames - 1);
  }
};

// [T x tokens x token_dim]. Token order is row-major over the patch grid;
// each token is flattened with h fastest, then w, then window frame, then
// channel. Window frames outside the clip replicate the edge frame.
Tensor extract_tubelets(const VideoClip& v, const TubeletConfig& cfg = {});
// Index of element (h, w, frame, channel) inside a flattened tubelet.
std::int64_t tubelet_offset(const TubeletConfig& cfg, std::int64_t h, std::int64_t w,
                            std::int64_t frame, std::int64_t channel);

// Raw container: "AVVR", then little-endian u32 version (1), width, height,
// frame count, fps numerator, fps denominator, followed by the RGB24 frames.
RawVideo read_raw_video(const std::filesystem::path& path);
void write_raw_video(const std::filesystem::path& path, const RawVideo& video);

}  // namespace avvit
