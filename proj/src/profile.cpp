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

#include "avvit/profile.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "avvit/error.hpp"
#include "avvit/graph.hpp"
#include "avvit/ops.hpp"

namespace avvit {

std::optional<ReferenceFigures> reference_figures(FrontEnd f) {
  switch (f) {
    case FrontEnd::kVit:
      return ReferenceFigures{37.2, 520.7, 162.3};
    case FrontEnd::kVgg21d:
      return ReferenceFigures{7.0, 299.3, 120.7};
    case FrontEnd::kAudioOnly:
      break;
  }
  return std::nullopt;
}

double ProfileRow::latency_mean() const {
  if (latency_ms.empty()) return 0.0;
  return std::accumulate(latency_ms.begin(), latency_ms.end(), 0.0) /
         static_cast<double>(latency_ms.size());
}

double ProfileRow::latency_std() const {
  if (latency_ms.size() < 2) return 0.0;
  const double m = latency_mean();
  double s = 0.0;
  for (double x : latency_ms) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(latency_ms.size() - 1));
}

namespace {

std::string frontend_prefix(FrontEnd f) { return f == FrontEnd::kVgg21d ? "vgg" : "vit"; }

template <typename F>
ProfileRow measure(std::string name, FrontEnd fe, bool whole, CostReport analytic,
                   const ParamStore& ps, const std::string& prefix, int runs, F&& forward) {
  ProfileRow row;
  row.name = std::move(name);
  row.front_end = fe;
  row.whole_model = whole;
  row.analytic = std::move(analytic);
  {
    Graph g(Graph::Mode::kCountOnly);
    GraphScope scope(g);
    forward();
    CostReport r = g.costs();
    ps.add_params_to(r);
    row.instrumented = prefix.empty() ? r : r.filtered(prefix);
  }
  NoGraphScope none;
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    forward();
    row.latency_ms.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return row;
}

}  // namespace

CostReport frontend_costs(const ModelConfig& cfg_in, std::int64_t batch, std::int64_t steps) {
  ModelConfig cfg = cfg_in;
  cfg.vit.output_dim = cfg.visual_dim;
  cfg.vgg.output_dim = cfg.visual_dim;
  CostReport r;
  if (cfg.front_end == FrontEnd::kVgg21d) Vgg21d::count_costs(r, cfg.vgg, batch, steps);
  if (cfg.front_end == FrontEnd::kVit) VitFrontend::count_costs(r, cfg.vit, batch, steps);
  return r;
}

std::vector<ProfileRow> profile(const ModelConfig& base, const std::vector<FrontEnd>& front_ends,
                                const ProfileOptions& opts, std::uint64_t seed) {
  if (opts.batch < 1 || opts.steps < 1 || opts.labels < 0 || opts.runs < 1) {
    throw ConfigError("profile needs batch, steps and runs >= 1 and labels >= 0");
  }
  std::vector<ProfileRow> rows;
  for (FrontEnd fe : front_ends) {
    ModelConfig cfg = base;
    cfg.front_end = fe;
    AvModel model(cfg, seed);
    Rng rng(seed + 1);
    Batch batch;
    batch.audio = Tensor({opts.batch, opts.steps, kAudioDim});
    for (double& x : batch.audio.mutable_values()) x = rng.normal();
    if (fe != FrontEnd::kAudioOnly) {
      batch.video = Tensor({opts.batch, opts.steps, kFrameSize, kFrameSize, kChannels});
      for (double& x : batch.video.mutable_values()) x = rng.uniform(-1.0, 1.0);
    }
    for (std::int64_t b = 0; b < opts.batch; ++b) {
      std::vector<std::int64_t> y;
      for (std::int64_t u = 0; u < opts.labels; ++u) y.push_back(rng.uniform_int(1, cfg.vocab - 1));
      batch.labels.push_back(y);
    }
    if (fe != FrontEnd::kAudioOnly) {
      rows.push_back(measure(to_string(fe) + " front-end", fe, false,
                             frontend_costs(cfg, opts.batch, opts.steps), model.params(),
                             frontend_prefix(fe), opts.runs,
                             [&] { return model.visual_features(batch.video); }));
    }
    rows.push_back(measure(to_string(fe) + " model", fe, true,
                           AvModel::count_costs(cfg, opts.batch, opts.steps, opts.labels),
                           model.params(), "", opts.runs, [&] { return model.loss(batch); }));
  }
  return rows;
}

ProfileReport format_profile(const ModelConfig& base, const ProfileOptions& opts,
                             const std::vector<ProfileRow>& rows) {
  Table t({"row", "preset", "batch", "steps", "params", "params_m", "mult_adds", "gflops",
           "latency_ms_mean", "latency_ms_std", "runs", "instrumented_match", "ref_params_m",
           "params_residual_pct"});
  std::ostringstream foot;
  const ProfileRow* vit = nullptr;
  const ProfileRow* vgg = nullptr;
  for (const auto& r : rows) {
    std::string ref = "", resid = "";
    if (!r.whole_model) {
      if (r.front_end == FrontEnd::kVit) vit = &r;
      if (r.front_end == FrontEnd::kVgg21d) vgg = &r;
      if (base.preset == "paper") {
        if (auto f = reference_figures(r.front_end)) {
          ref = fixed(f->params_m, 1);
          resid = fixed(100.0 * (static_cast<double>(r.analytic.params) / 1e6 - f->params_m) /
                            f->params_m,
                        1);
        }
      }
    }
    t.add_row({r.name, base.preset, std::to_string(opts.batch), std::to_string(opts.steps),
               std::to_string(r.analytic.params), fixed(static_cast<double>(r.analytic.params) / 1e6, 3),
               std::to_string(r.analytic.mult_adds), fixed(static_cast<double>(r.analytic.flops) / 1e9, 6),
               fixed(r.latency_mean(), 3), fixed(r.latency_std(), 3),
               std::to_string(r.latency_ms.size()), r.consistent() ? "yes" : "no", ref, resid});
  }
  foot << CostReport::convention() << '\n'
       << "GFLOPS are analytic FLOPs per forward pass on a batch of " << opts.batch << " x "
       << opts.steps << " steps (" << opts.labels << " labels per utterance for model rows), / 1e9.\n"
       << "Latency: mean of " << opts.runs
       << " timed forward passes after one untimed warm-up pass (host CPU wall clock).\n";
  if (base.preset == "paper") {
    for (const ProfileRow* r : {vit, vgg}) {
      if (!r) continue;
      const auto f = *reference_figures(r->front_end);
      const double m = static_cast<double>(r->analytic.params) / 1e6;
      foot << to_string(r->front_end) << " front-end params: " << fixed(m, 3) << " M vs " << fixed(f.params_m, 1)
           << " M published, residual " << fixed(100.0 * (m - f.params_m) / f.params_m, 1) << "%\n";
    }
  }
  if (vit && vgg) {
    const double ratio = static_cast<double>(vit->analytic.flops) / static_cast<double>(vgg->analytic.flops);
    const auto a = *reference_figures(FrontEnd::kVit), b = *reference_figures(FrontEnd::kVgg21d);
    foot << "vit/vgg21d analytic FLOP ratio: " << fixed(ratio, 3) << " (published " << fixed(a.gflops, 1)
         << "/" << fixed(b.gflops, 1) << " = " << fixed(a.gflops / b.gflops, 3) << ")\n";
    foot << "vit/vgg21d latency ratio: " << fixed(vit->latency_mean() / vgg->latency_mean(), 3)
         << " (published " << fixed(a.latency_ms, 1) << "/" << fixed(b.latency_ms, 1) << " = "
         << fixed(a.latency_ms / b.latency_ms, 3) << ", different hardware)\n";
  }
  return {t, foot.str()};
}

}  // namespace avvit
