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

#include "avvit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "avvit/error.hpp"

namespace avvit {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'V', 'V', 'I', 'T', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is, const std::string& what) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw FormatError("checkpoint truncated while reading " + what);
  }
  return v;
}

std::string take_string(std::istream& is, std::uint64_t n, const std::string& what) {
  if (n > (1ull << 32)) throw FormatError("checkpoint " + what + " length is implausible");
  std::string s(static_cast<std::size_t>(n), '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw FormatError("checkpoint truncated while reading " + what);
  }
  return s;
}

}  // namespace

const Tensor& Checkpoint::blob(const std::string& name) const {
  for (const auto& [n, t] : blobs) {
    if (n == name) return t;
  }
  throw FormatError("checkpoint has no blob " + name);
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, ckpt.config_text.size());
  os.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(ckpt.step));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.blobs.size()));
  for (const auto& [name, t] : ckpt.blobs) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw InputError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw FormatError(path.string() + " is not a checkpoint");
  }
  const auto version = take<std::uint32_t>(is, "version");
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config_text = take_string(is, take<std::uint64_t>(is, "config length"), "config");
  ck.step = static_cast<std::int64_t>(take<std::uint64_t>(is, "step"));
  const auto count = take<std::uint32_t>(is, "blob count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = take_string(is, take<std::uint32_t>(is, "name length"), "name");
    const auto rank = take<std::uint32_t>(is, "rank");
    if (rank == 0 || rank > 8) throw FormatError("blob " + name + " has invalid rank");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto e = take<std::uint64_t>(is, "extent");
      if (e == 0 || e > (1ull << 40)) throw FormatError("blob " + name + " has invalid extent");
      shape.push_back(static_cast<std::int64_t>(e));
    }
    Tensor t(shape);
    if (!is.read(reinterpret_cast<char*>(t.mutable_data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)))) {
      throw FormatError("checkpoint truncated in blob " + name);
    }
    ck.blobs.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

void load_params(ParamStore& ps, const Checkpoint& ckpt, const std::string& prefix) {
  for (const auto& [name, param] : ps.entries()) {
    const Tensor& src = ckpt.blob(prefix + name);
    if (src.shape() != param.shape()) {
      throw FormatError("blob " + name + " has shape " + to_string(src.shape()) + ", expected " +
                        to_string(param.shape()));
    }
    Tensor dst = param;
    std::copy(src.values().begin(), src.values().end(), dst.mutable_values().begin());
  }
}

}  // namespace avvit
