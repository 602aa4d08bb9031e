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

// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Criteria can be selected by number on the
// command line (default: all).

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "avvit/audio.hpp"
#include "avvit/checkpoint.hpp"
#include "avvit/graph.hpp"
#include "avvit/model.hpp"
#include "avvit/ops.hpp"
#include "avvit/profile.hpp"
#include "avvit/rnnt.hpp"
#include "avvit/run_config.hpp"
#include "avvit/train.hpp"
#include "avvit/vgg21d.hpp"
#include "avvit/video.hpp"
#include "avvit/vit.hpp"
#include "gradcheck.hpp"
#include "rnnt_oracle.hpp"

namespace fs = std::filesystem;
using namespace avvit;
using avvit::testing::grad_check;
using avvit::testing::random_tensor;
using avvit::testing::weighted_sum;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
           return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
         });
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity

struct GradTally {
  double worst = 0.0;
  std::string worst_name;
  std::int64_t checks = 0;
  std::vector<std::string> failures;

  void run(const std::string& name, const std::function<Tensor(std::vector<Tensor>&)>& f,
           std::vector<Tensor> inputs, double eps = 1e-5, std::int64_t cap = 0) {
    const auto r = grad_check(f, std::move(inputs), eps, cap);
    checks += r.checked;
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = name + " " + r.worst;
    }
    if (!(r.max_rel_error < 1e-5)) failures.push_back(name + " (" + sci(r.max_rel_error) + ")");
  }
};

Tensor away_from_zero(Tensor t) {
  for (double& v : t.mutable_values()) v += v >= 0 ? 0.1 : -0.1;
  return t;
}

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  Rng rng(101);
  GradTally g;
  for (const Shape& s : std::vector<Shape>{{3}, {2, 5}, {2, 3, 4}}) {
    auto a = random_tensor(s, rng), b = random_tensor(s, rng);
    g.run("add", [](auto& v) { return weighted_sum(add(v[0], v[1])); }, {a, b});
    g.run("sub", [](auto& v) { return weighted_sum(sub(v[0], v[1])); }, {a, b});
    g.run("mul", [](auto& v) { return weighted_sum(mul(v[0], v[1])); }, {a, b});
    g.run("scale", [](auto& v) { return weighted_sum(scale(v[0], 0.7)); }, {a});
    g.run("relu", [](auto& v) { return weighted_sum(relu(v[0])); }, {away_from_zero(a)});
    g.run("gelu", [](auto& v) { return weighted_sum(gelu(v[0])); }, {a});
    g.run("tanh", [](auto& v) { return weighted_sum(tanh(v[0])); }, {a});
    g.run("sigmoid", [](auto& v) { return weighted_sum(sigmoid(v[0])); }, {a});
    g.run("softmax", [](auto& v) { return weighted_sum(softmax(v[0])); }, {a});
    g.run("log_softmax", [](auto& v) { return weighted_sum(log_softmax(v[0])); }, {a});
    g.run("sum", [](auto& v) { return sum(mul(v[0], v[0])); }, {a});
    g.run("mean", [](auto& v) { return mean(mul(v[0], v[0])); }, {a});
    g.run("broadcast add", [](auto& v) { return weighted_sum(add(v[0], v[1])); },
          {a, random_tensor({s.back()}, rng)});
    g.run("expand_leading", [](auto& v) { return weighted_sum(expand_leading(v[0], 2)); }, {a});
    g.run("reshape", [](auto& v) { return weighted_sum(reshape(v[0], {v[0].size()})); }, {a});
  }
  {
    auto a = random_tensor({2, 3, 4}, rng);
    g.run("permute", [](auto& v) { return weighted_sum(permute(v[0], {2, 0, 1})); }, {a});
    g.run("slice", [](auto& v) { return weighted_sum(slice(v[0], 1, 1, 3)); }, {a});
    g.run("concat", [](auto& v) { return weighted_sum(concat({v[0], v[1]}, 2)); },
          {a, random_tensor({2, 3, 2}, rng)});
    g.run("outer_add", [](auto& v) { return weighted_sum(outer_add(v[0], v[1])); },
          {random_tensor({3, 4}, rng), random_tensor({2, 4}, rng)});
    const std::vector<std::int64_t> ids{2, 0, 2, 1};
    g.run("gather_rows", [&](auto& v) { return weighted_sum(gather_rows(v[0], ids)); },
          {random_tensor({3, 4}, rng)});
  }
  for (auto [m, k, n] : std::vector<std::array<int, 3>>{{1, 1, 1}, {3, 4, 2}, {5, 2, 6}}) {
    auto a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    g.run("matmul", [](auto& v) { return weighted_sum(matmul(v[0], v[1])); }, {a, b});
    g.run("linear", [](auto& v) { return weighted_sum(linear(v[0], v[1], v[2])); },
          {a, b, random_tensor({n}, rng)});
    g.run("bmm", [](auto& v) { return weighted_sum(bmm(v[0], v[1])); },
          {random_tensor({2, m, k}, rng), random_tensor({2, k, n}, rng)});
    g.run("bmm^T", [](auto& v) { return weighted_sum(bmm(v[0], v[1], true)); },
          {random_tensor({2, m, k}, rng), random_tensor({2, n, k}, rng)});
    g.run("layer_norm", [](auto& v) { return weighted_sum(layer_norm(v[0], v[1], v[2], 1e-6)); },
          {random_tensor({m, k + 1}, rng), random_tensor({k + 1}, rng), random_tensor({k + 1}, rng)});
  }
  for (const Shape& s : std::vector<Shape>{{1, 2, 4, 4, 1}, {2, 3, 4, 6, 2}}) {
    auto x = random_tensor(s, rng);
    const auto c = s.back();
    auto ks = random_tensor({1, 3, 3, c, 2}, rng);
    g.run("conv_spatial", [](auto& v) { return weighted_sum(conv_spatial(v[0], v[1])); }, {x, ks});
    g.run("conv_spatial/2", [](auto& v) { return weighted_sum(conv_spatial(v[0], v[1], 2)); }, {x, ks});
    g.run("conv_temporal", [](auto& v) { return weighted_sum(conv_temporal(v[0], v[1])); },
          {x, random_tensor({3, 1, 1, c, 2}, rng)});
    g.run("conv3d", [](auto& v) { return weighted_sum(conv3d(v[0], v[1])); },
          {x, random_tensor({3, 3, 3, c, 2}, rng)});
    g.run("maxpool_spatial", [](auto& v) { return weighted_sum(maxpool_spatial(v[0])); }, {x});
    g.run("global_avg_pool", [](auto& v) { return weighted_sum(global_avg_pool_spatial(v[0])); }, {x});
  }
  for (auto [n, in, h] : std::vector<std::array<int, 3>>{{1, 2, 1}, {2, 3, 2}}) {
    g.run(
        "lstm_cell",
        [](auto& v) {
          auto s = lstm_cell(v[0], {v[1], v[2]}, v[3], v[4], v[5]);
          return add(weighted_sum(s.h, 1), weighted_sum(s.c, 2));
        },
        {random_tensor({n, in}, rng), random_tensor({n, h}, rng), random_tensor({n, h}, rng),
         random_tensor({in, 4 * h}, rng), random_tensor({h, 4 * h}, rng), random_tensor({4 * h}, rng)});
  }
  {
    std::vector<Tensor> in{random_tensor({2, 3, 4}, rng)};
    for (int i = 0; i < 4; ++i) {
      in.push_back(random_tensor({4, 4}, rng, 0.5));
      in.push_back(random_tensor({4}, rng, 0.1));
    }
    g.run(
        "multi_head_attention",
        [](auto& v) {
          AttentionWeights w{v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
          return weighted_sum(multi_head_attention(v[0], w, 2));
        },
        in);
  }
  for (int trial = 0; trial < 4; ++trial) {
    const std::int64_t T = 1 + trial % 3, U = trial % 3, V = 3;
    std::vector<std::int64_t> y;
    for (std::int64_t u = 0; u < U; ++u) y.push_back(1 + (u + trial) % (V - 1));
    g.run("rnnt_loss", [y](auto& v) { return rnnt_loss(log_softmax(v[0]), y); },
          {random_tensor({T, U + 1, V}, rng)});
  }
  {
    // Tiny front-ends on full-size 128 x 128 frames.
    Rng r(7);
    ParamStore ps;
    Vgg21dConfig vc;
    vc.layer_channels = {2, 2, 3, 3, 3, 3, 4, 4, 4, 4};
    vc.output_dim = 4;
    Vgg21d vgg(ps, vc, r);
    std::vector<Tensor> params;
    for (auto& [name, t] : ps.entries()) {
      Tensor p = t;
      if (name.ends_with("/bias")) {
        for (double& b : p.mutable_values()) b = r.uniform(0.05, 0.2);
      }
      params.push_back(p);
    }
    Tensor video({1, 3, kFrameSize, kFrameSize, kChannels});
    for (double& x : video.mutable_values()) x = r.uniform(-1, 1);
    g.run("vgg21d front-end", [&](auto&) { return weighted_sum(vgg(video)); }, params, 1e-6, 8);
  }
  {
    Rng r(8);
    ParamStore ps;
    VitConfig vc;
    vc.layers = 1;
    vc.heads = 2;
    vc.d_model = 8;
    vc.d_ff = 16;
    vc.output_dim = 8;
    VitFrontend vit(ps, vc, r);
    std::vector<Tensor> params;
    for (auto& [name, t] : ps.entries()) params.push_back(t);
    Tensor video({1, 2, kFrameSize, kFrameSize, kChannels});
    for (double& x : video.mutable_values()) x = r.uniform(-1, 1);
    const Tensor tokens = batch_tubelets(video, vc.tubelet);
    g.run("vit front-end", [&](auto&) { return weighted_sum(vit.forward_tokens(tokens)); }, params,
          1e-5, 16);
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << g.checks << " probes, max rel err " << sci(g.worst) << " at " << g.worst_name << ", "
     << std::fixed;
  os.precision(1);
  os << secs << " s";
  for (const auto& f : g.failures) os << "; FAILED " << f;
  return {g.failures.empty() && secs < 300, os.str()};
}

// ---------------------------------------------------------------------------
// 2. Transducer loss against alignment enumeration

Outcome rnnt_oracle() {
  const auto t0 = Clock::now();
  Rng rng(202);
  double loss_err = 0.0, grad_err = 0.0, fd_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::int64_t T = rng.uniform_int(1, 4), U = rng.uniform_int(0, 3), V = rng.uniform_int(2, 3);
    std::vector<std::int64_t> y;
    for (std::int64_t u = 0; u < U; ++u) y.push_back(rng.uniform_int(1, V - 1));
    Tensor logits = random_tensor({T, U + 1, V}, rng);
    Tensor lp;
    {
      NoGraphScope none;
      lp = log_softmax(logits);
    }
    const auto oracle = avvit::testing::enumerate_alignments(lp, y);
    lp.set_requires_grad(true);
    Graph g;
    double loss = 0.0;
    {
      GraphScope scope(g);
      Tensor l = rnnt_loss(lp, y);
      loss = l.item();
      backward(g, l);
    }
    loss_err = std::max(loss_err, std::abs(loss - oracle.loss));
    for (std::int64_t i = 0; i < lp.size(); ++i) {
      grad_err = std::max(grad_err, std::abs(lp.grad()[i] + oracle.edge_posterior[i]));
    }
    // Finite differences through the softmax, on the raw logits.
    const auto fd = grad_check([&](auto& v) { return rnnt_loss(log_softmax(v[0]), y); }, {logits});
    fd_err = std::max(fd_err, fd.max_rel_error);
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "200 lattices (T<=4, U<=3, V<=3): max |loss - enumeration| " << sci(loss_err)
     << ", max |grad + posterior| " << sci(grad_err) << ", finite-difference rel err " << sci(fd_err)
     << ", " << std::fixed;
  os.precision(1);
  os << secs << " s";
  return {loss_err <= 1e-9 && grad_err <= 1e-5 && fd_err <= 1e-5 && secs < 60, os.str()};
}

// ---------------------------------------------------------------------------
// 3. Cost accounting

Outcome cost_accounting() {
  std::vector<std::string> mismatches;
  int compared = 0;
  std::vector<ModelConfig> cfgs;
  for (const char* preset : {"desk", "paper"}) {
    for (FrontEnd f : {FrontEnd::kVgg21d, FrontEnd::kVit, FrontEnd::kAudioOnly}) {
      ModelConfig c = ModelConfig::preset_named(preset);
      c.front_end = f;
      cfgs.push_back(c);
    }
  }
  ModelConfig footnote = ModelConfig::preset_named("paper");
  footnote.front_end = FrontEnd::kVgg21d;
  footnote.vgg.layer_channels = Vgg21dConfig::footnote_channels().layer_channels;
  cfgs.push_back(footnote);
  for (const auto& cfg : cfgs) {
    // Whole-model counts on a small batch; the counting pass is the same
    // code path at any size.
    const std::int64_t b = cfg.preset == "desk" ? 2 : 1, t = cfg.preset == "desk" ? 4 : 2, u = 2;
    AvModel model(cfg, 3);
    Rng rng(4);
    Batch batch;
    batch.audio = random_tensor({b, t, kAudioDim}, rng);
    if (cfg.front_end != FrontEnd::kAudioOnly) {
      batch.video = Tensor({b, t, kFrameSize, kFrameSize, kChannels});
      for (double& x : batch.video.mutable_values()) x = rng.uniform(-1, 1);
    }
    for (std::int64_t i = 0; i < b; ++i) batch.labels.push_back({3, 4});
    ++compared;
    const auto expected = AvModel::count_costs(cfg, b, t, u);
    const auto actual = model.instrumented_costs(batch);
    if (!(expected == actual) || expected.params != model.params().total()) {
      mismatches.push_back(cfg.preset + "/" + to_string(cfg.front_end));
    }
  }
  ModelConfig paper = ModelConfig::preset_named("paper");
  paper.front_end = FrontEnd::kVit;
  const auto vit = frontend_costs(paper, 1, 32);
  paper.front_end = FrontEnd::kVgg21d;
  const auto vgg = frontend_costs(paper, 1, 32);
  const auto vit_ref = *reference_figures(FrontEnd::kVit);
  const auto vgg_ref = *reference_figures(FrontEnd::kVgg21d);
  const double vit_m = static_cast<double>(vit.params) / 1e6, vgg_m = static_cast<double>(vgg.params) / 1e6;
  const double vit_res = (vit_m - vit_ref.params_m) / vit_ref.params_m;
  const double vgg_res = (vgg_m - vgg_ref.params_m) / vgg_ref.params_m;
  const double ratio = static_cast<double>(vit.flops) / static_cast<double>(vgg.flops);
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%d configs analytic == instrumented%s; vit params %.3f M vs %.1f M (residual %+.1f%%), "
                "vgg21d %.3f M vs %.1f M (residual %+.1f%%); vit/vgg21d FLOP ratio %.3f vs published %.3f",
                compared, mismatches.empty() ? "" : " EXCEPT", vit_m, vit_ref.params_m, 100 * vit_res,
                vgg_m, vgg_ref.params_m, 100 * vgg_res, ratio, vit_ref.gflops / vgg_ref.gflops);
  std::string detail = buf;
  for (const auto& m : mismatches) detail += " " + m;
  return {mismatches.empty() && std::abs(vit_res) <= 0.2 && std::abs(vgg_res) <= 0.2, detail};
}

// ---------------------------------------------------------------------------
// 4. Pipeline exactness

Outcome pipeline_exactness() {
  Rng rng(404);
  int failures = 0, cases = 0;
  // Tubelets: for every step and window slot, the 16 tokens tile the source
  // frame exactly once, and reassembling them reproduces it bit for bit.
  for (int trial = 0; trial < 3; ++trial) {
    VideoClip v;
    const std::int64_t frames = rng.uniform_int(1, 10);
    v.frames = Tensor({frames, kFrameSize, kFrameSize, kChannels});
    for (double& x : v.frames.mutable_values()) x = rng.uniform(-1, 1);
    for (auto align : {TubeletAlignment::kCentered, TubeletAlignment::kCausal}) {
      TubeletConfig cfg;
      cfg.alignment = align;
      const Tensor tok = extract_tubelets(v, cfg);
      const auto fv = v.frames.values();
      const auto tv = tok.values();
      const std::int64_t frame_size = kFrameSize * kFrameSize * kChannels;
      for (std::int64_t t = 0; t < frames; ++t) {
        for (std::int64_t slot = 0; slot < cfg.frames; ++slot) {
          const std::int64_t src = std::clamp<std::int64_t>(t + cfg.window_start() + slot, 0, frames - 1);
          std::vector<double> rebuilt(static_cast<std::size_t>(frame_size), std::nan(""));
          std::vector<int> hits(static_cast<std::size_t>(frame_size), 0);
          for (std::int64_t k = 0; k < cfg.tokens_per_step(); ++k) {
            const std::int64_t gy = k / cfg.grid(), gx = k % cfg.grid();
            for (std::int64_t h = 0; h < cfg.patch; ++h) {
              for (std::int64_t w = 0; w < cfg.patch; ++w) {
                for (std::int64_t c = 0; c < kChannels; ++c) {
                  const std::int64_t dst = ((gy * cfg.patch + h) * kFrameSize + gx * cfg.patch + w) * kChannels + c;
                  rebuilt[static_cast<std::size_t>(dst)] =
                      tv[static_cast<std::size_t>((t * cfg.tokens_per_step() + k) * cfg.token_dim() +
                                                  tubelet_offset(cfg, h, w, slot, c))];
                  ++hits[static_cast<std::size_t>(dst)];
                }
              }
            }
          }
          ++cases;
          const bool tiled = std::all_of(hits.begin(), hits.end(), [](int n) { return n == 1; });
          if (!tiled || !bit_equal(rebuilt, fv.subspan(static_cast<std::size_t>(src * frame_size),
                                                       static_cast<std::size_t>(frame_size)))) {
            ++failures;
          }
        }
      }
    }
  }
  // stack3 / unstack3.
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t n = 3 * rng.uniform_int(1, 40);
    Tensor mel = random_tensor({n, 80}, rng);
    ++cases;
    if (!bit_equal(unstack3(stack3(mel)).values(), mel.values())) ++failures;
  }
  // fuse_concat then slice.
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t b = rng.uniform_int(1, 3), t = rng.uniform_int(1, 40);
    Tensor a = random_tensor({b, t, 240}, rng), v = random_tensor({b, t, 512}, rng);
    const Tensor f = fuse_concat(a, v);
    ++cases;
    if (!bit_equal(slice(f, 2, 0, 240).values(), a.values()) ||
        !bit_equal(slice(f, 2, 240, 752).values(), v.values())) {
      ++failures;
    }
  }
  // Resampling at equal rates is the identity.
  for (double fps : {25.0, 30.0, kFeatureRate, 59.94}) {
    VideoClip v;
    v.fps = fps;
    v.frames = random_tensor({rng.uniform_int(1, 12), kFrameSize, kFrameSize, kChannels}, rng);
    ++cases;
    if (!bit_equal(resample_nn(v, fps).frames.values(), v.frames.values())) ++failures;
  }
  return {failures == 0, std::to_string(cases) + " cases (tubelet tiling and reassembly, stack3, "
                                                  "fuse_concat, equal-rate resampling), " +
                             std::to_string(failures) + " mismatches"};
}

// ---------------------------------------------------------------------------
// 5. Schedule values

Outcome schedule_values() {
  const LrSchedule s = LrSchedule::paper();
  const bool exact = s.lr_at(30000) == 1e-4 && s.lr_at(200000) == 1e-4 && s.lr_at(300000) == 1e-6;
  double gap = 0.0;
  for (double joint : {30000.0, 200000.0}) {
    gap = std::max(gap, std::abs(s.lr_at(std::nextafter(joint, 0.0)) - s.lr_at(joint)));
    gap = std::max(gap, std::abs(s.lr_at(std::nextafter(joint, 1e9)) - s.lr_at(joint)));
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "lr(30000)=%.17g lr(200000)=%.17g lr(300000)=%.17g; max jump at joints %.2e", s.lr_at(30000),
                s.lr_at(200000), s.lr_at(300000), gap);
  return {exact && gap <= 1e-12, buf};
}

// ---------------------------------------------------------------------------
// 6. SNR mixer

Outcome snr_mixer() {
  Rng rng(606);
  double worst = 0.0;
  int trials = 0;
  for (double target : {0.0, 10.0, 20.0}) {
    for (int k = 0; k < 10; ++k) {
      Waveform clean, noise;
      clean.samples.resize(static_cast<std::size_t>(rng.uniform_int(4000, 20000)));
      noise.samples.resize(static_cast<std::size_t>(rng.uniform_int(1000, 30000)));
      for (double& x : clean.samples) x = rng.normal(0.2);
      for (double& x : noise.samples) x = rng.uniform(-0.5, 0.5);
      const Waveform mixed = mix_at_snr(clean, noise, target);
      Waveform residual = mixed;
      for (std::size_t i = 0; i < residual.samples.size(); ++i) residual.samples[i] -= clean.samples[i];
      const double measured = 10 * std::log10(clean.power() / residual.power());
      worst = std::max(worst, std::abs(measured - target));
      ++trials;
    }
  }
  return {worst < 0.01, std::to_string(trials) + " mixes at {0, 10, 20} dB, max error " + sci(worst) + " dB"};
}

// ---------------------------------------------------------------------------
// 7. Toy end-to-end training

struct ToyRun {
  std::unique_ptr<AvModel> model;
  TrainResult result;
  double final_wer = 1.0;
  double seconds = 0.0;
};

ToyRun toy_train(FrontEnd fe, bool video_only, double target, const SyntheticTask& task) {
  ModelConfig mc = ModelConfig::preset_named("desk");
  mc.front_end = fe;
  TrainConfig tc = TrainConfig::preset_named("desk");
  tc.steps = 2000;
  tc.target_wer = target;
  if (video_only) tc.noise_prob = 0.0;
  ToyRun run;
  const auto t0 = Clock::now();
  run.model = std::make_unique<AvModel>(mc, 1);
  Trainer trainer(*run.model, tc, mc.to_text() + tc.to_text());
  run.result = trainer.run(task);
  run.final_wer = run.result.wer_probes.empty() ? 1.0 : run.result.wer_probes.back().second;
  run.seconds = seconds_since(t0);
  return run;
}

Outcome toy_end_to_end() {
  const auto t0 = Clock::now();
  TaskConfig tc;
  const SyntheticTask task(tc);
  tc.video_only = true;
  const SyntheticTask lips(tc);
  std::ostringstream os;
  os << std::fixed;
  os.precision(1);
  bool pass = true;
  auto report = [&](const char* name, const ToyRun& r, double target) {
    const bool ok = r.final_wer < target;
    pass = pass && ok;
    os << name << " WER " << 100 * r.final_wer << "% after " << r.result.steps_run << " steps ("
       << r.seconds << " s)" << (ok ? "" : " [above target]") << "; ";
  };
  const ToyRun vgg = toy_train(FrontEnd::kVgg21d, false, 0.05, task);
  report("vgg21d", vgg, 0.05);
  const ToyRun vit = toy_train(FrontEnd::kVit, false, 0.05, task);
  report("vit", vit, 0.05);
  const ToyRun lip = toy_train(FrontEnd::kVgg21d, true, 0.20, lips);
  report("video-only vgg21d", lip, 0.20);
  const ToyRun audio = toy_train(FrontEnd::kAudioOnly, false, 0.05, task);
  report("audio-only", audio, 0.05);
  const auto at0 = Condition::snr(0);
  const double w_audio = evaluate_wer(*audio.model, task, at0);
  const double w_vgg = evaluate_wer(*vgg.model, task, at0);
  const double w_vit = evaluate_wer(*vit.model, task, at0);
  const bool direction = w_vgg < w_audio && w_vit < w_audio;
  pass = pass && direction;
  os << "0 dB WER: audio-only " << 100 * w_audio << "%, vgg21d AV " << 100 * w_vgg << "%, vit AV "
     << 100 * w_vit << "%" << (direction ? "" : " [AV does not beat audio-only]");
  const double secs = seconds_since(t0);
  os << "; total " << secs << " s";
  return {pass && secs < 1800, os.str()};
}

// ---------------------------------------------------------------------------
// 8. Determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string mask_wall_ms(const std::string& log) {
  std::istringstream in(log);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.find(",\"wall_ms\":")) + "\n";
  return out;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "avvit_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const SyntheticTask task(TaskConfig{});
  std::ostringstream os;
  bool pass = true;
  for (FrontEnd fe : {FrontEnd::kVgg21d, FrontEnd::kVit}) {
    for (int run = 0; run < 2; ++run) {
      ModelConfig mc = ModelConfig::preset_named("desk");
      mc.front_end = fe;
      TrainConfig tc = TrainConfig::preset_named("desk");
      tc.steps = 12;
      tc.eval_every = 0;
      tc.checkpoint_every = 6;
      AvModel model(mc, 11);
      Trainer trainer(model, tc, mc.to_text() + tc.to_text());
      const std::string tag = to_string(fe) + std::to_string(run);
      trainer.run(task, {dir / (tag + ".jsonl"), dir / (tag + ".ckpt"), std::nullopt});
    }
    const std::string a = to_string(fe) + "0", b = to_string(fe) + "1";
    const bool ck = slurp(dir / (a + ".ckpt")) == slurp(dir / (b + ".ckpt"));
    const std::string log_a = slurp(dir / (a + ".jsonl"));
    const bool logs = !log_a.empty() && mask_wall_ms(log_a) == mask_wall_ms(slurp(dir / (b + ".jsonl")));
    pass = pass && ck && logs;
    os << to_string(fe) << ": checkpoints " << (ck ? "identical" : "DIFFER") << ", logs (wall_ms masked) "
       << (logs ? "identical" : "DIFFER") << "; ";
  }
  fs::remove_all(dir);
  os << "12 steps, two runs per front-end";
  return {pass, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  keep_large_allocations_mapped();
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> all{
      {1, "gradient fidelity", gradient_fidelity},  {2, "RNN-T oracle equivalence", rnnt_oracle},
      {3, "cost accounting", cost_accounting},      {4, "pipeline exactness", pipeline_exactness},
      {5, "schedule values", schedule_values},      {6, "SNR mixer", snr_mixer},
      {7, "toy end-to-end", toy_end_to_end},        {8, "determinism", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  bool all_pass = true;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all_pass = all_pass && o.pass;
    std::printf("criterion %d (%s): %s - %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
