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

#include "avvit/model.hpp"

#include <sstream>

#include "avvit/error.hpp"
#include "avvit/graph.hpp"
#include "avvit/ops.hpp"

namespace avvit {

std::string to_string(FrontEnd f) {
  switch (f) {
    case FrontEnd::kVgg21d:
      return "vgg21d";
    case FrontEnd::kVit:
      return "vit";
    case FrontEnd::kAudioOnly:
      return "audio-only";
  }
  return "?";
}

FrontEnd parse_front_end(const std::string& name) {
  if (name == "vgg21d") return FrontEnd::kVgg21d;
  if (name == "vit") return FrontEnd::kVit;
  if (name == "audio-only") return FrontEnd::kAudioOnly;
  throw ConfigError("unknown front end '" + name + "' (expected vgg21d, vit or audio-only)");
}

// ---------------------------------------------------------------------------
// Configuration

ModelConfig ModelConfig::preset_named(const std::string& name) {
  ModelConfig c;
  c.preset = name;
  if (name == "paper") return c;
  if (name == "desk") {
    c.vit.layers = 2;
    c.vit.heads = 2;
    c.vit.d_model = 32;
    c.vit.d_ff = 64;
    c.vgg.layer_channels = {4, 4, 8, 8, 8, 8, 16, 16, 16, 16};
    c.encoder = {2, 64, 4, 128, false};
    c.pred_units = 64;
    c.pred_embed = 32;
    c.joint_dim = 64;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
}

const std::vector<std::string>& ModelConfig::keys() {
  static const std::vector<std::string> k{
      "front_end",  "vit_layers",     "vit_heads", "vit_d_model", "vit_d_ff",
      "vit_pool",   "tubelet_window", "vgg_channels", "vgg_pool_after", "vgg_full3d",
      "visual_dim", "enc_layers",     "enc_width", "enc_heads",   "enc_ff",
      "pred_layers", "pred_units",    "pred_embed", "joint_dim"};
  return k;
}

ModelConfig ModelConfig::from(const KeyValues& kv) {
  ModelConfig c;
  if (kv.has("preset")) {
    c = preset_named(kv.get("preset"));
  } else {
    require_keys(kv, keys(), "model");
    c.preset = "custom";
  }
  if (kv.has("front_end")) c.front_end = parse_front_end(kv.get("front_end"));
  auto set_int = [&](const char* key, auto& field) {
    if (kv.has(key)) field = static_cast<std::remove_reference_t<decltype(field)>>(kv.get_int(key));
  };
  set_int("vit_layers", c.vit.layers);
  set_int("vit_heads", c.vit.heads);
  set_int("vit_d_model", c.vit.d_model);
  set_int("vit_d_ff", c.vit.d_ff);
  if (kv.has("vit_pool")) {
    const auto& p = kv.get("vit_pool");
    if (p == "token") {
      c.vit.pool = VitPooling::kPrependedToken;
    } else if (p == "first-tubelet") {
      c.vit.pool = VitPooling::kFirstTubelet;
    } else {
      throw ConfigError("vit_pool must be token or first-tubelet, got '" + p + "'");
    }
  }
  if (kv.has("tubelet_window")) {
    const auto& w = kv.get("tubelet_window");
    if (w == "centered") {
      c.vit.tubelet.alignment = TubeletAlignment::kCentered;
    } else if (w == "causal") {
      c.vit.tubelet.alignment = TubeletAlignment::kCausal;
    } else {
      throw ConfigError("tubelet_window must be centered or causal, got '" + w + "'");
    }
  }
  if (kv.has("vgg_channels")) {
    const auto& v = kv.get("vgg_channels");
    if (v == "default") {
      c.vgg.layer_channels = Vgg21dConfig{}.layer_channels;
    } else if (v == "footnote") {
      c.vgg.layer_channels = Vgg21dConfig::footnote_channels().layer_channels;
    } else {
      c.vgg.layer_channels = kv.get_int_list("vgg_channels");
    }
  }
  if (kv.has("vgg_pool_after")) {
    c.vgg.pool_after.clear();
    for (auto p : kv.get_int_list("vgg_pool_after")) c.vgg.pool_after.push_back(static_cast<int>(p));
  }
  if (kv.has("vgg_full3d")) c.vgg.full3d = kv.get_bool("vgg_full3d");
  set_int("visual_dim", c.visual_dim);
  set_int("enc_layers", c.encoder.layers);
  set_int("enc_width", c.encoder.width);
  set_int("enc_heads", c.encoder.heads);
  set_int("enc_ff", c.encoder.ff_width);
  set_int("pred_layers", c.pred_layers);
  set_int("pred_units", c.pred_units);
  set_int("pred_embed", c.pred_embed);
  set_int("joint_dim", c.joint_dim);
  c.validate();
  return c;
}

std::string ModelConfig::to_text() const {
  auto list = [](const auto& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  std::ostringstream os;
  os << "front_end = " << to_string(front_end) << '\n'
     << "vit_layers = " << vit.layers << '\n'
     << "vit_heads = " << vit.heads << '\n'
     << "vit_d_model = " << vit.d_model << '\n'
     << "vit_d_ff = " << vit.d_ff << '\n'
     << "vit_pool = " << (vit.pool == VitPooling::kPrependedToken ? "token" : "first-tubelet")
     << '\n'
     << "tubelet_window = "
     << (vit.tubelet.alignment == TubeletAlignment::kCentered ? "centered" : "causal") << '\n'
     << "vgg_channels = " << list(vgg.layer_channels) << '\n'
     << "vgg_pool_after = " << list(vgg.pool_after) << '\n'
     << "vgg_full3d = " << (vgg.full3d ? "true" : "false") << '\n'
     << "visual_dim = " << visual_dim << '\n'
     << "enc_layers = " << encoder.layers << '\n'
     << "enc_width = " << encoder.width << '\n'
     << "enc_heads = " << encoder.heads << '\n'
     << "enc_ff = " << encoder.ff_width << '\n'
     << "pred_layers = " << pred_layers << '\n'
     << "pred_units = " << pred_units << '\n'
     << "pred_embed = " << pred_embed << '\n'
     << "joint_dim = " << joint_dim << '\n';
  return os.str();
}

void ModelConfig::validate() const {
  VitConfig v = vit;
  v.output_dim = visual_dim;
  v.validate();
  Vgg21dConfig g = vgg;
  g.output_dim = visual_dim;
  g.validate();
  if (encoder.layers < 0 || encoder.width <= 0 || encoder.ff_width <= 0) {
    throw ConfigError("encoder sizes must be positive");
  }
  if (encoder.heads <= 0 || encoder.width % encoder.heads != 0) {
    throw ConfigError("enc_width must be divisible by enc_heads");
  }
  if (pred_layers < 1 || pred_units <= 0 || pred_embed <= 0 || joint_dim <= 0) {
    throw ConfigError("prediction and joint sizes must be positive");
  }
}

// ---------------------------------------------------------------------------

Tensor fuse_concat(const Tensor& audio, const Tensor& visual) {
  if (audio.rank() != 3 || visual.rank() != 3) {
    throw DimensionError("fusion expects [B x T x D] inputs, got " + to_string(audio.shape()) +
                         " and " + to_string(visual.shape()));
  }
  if (audio.dim(0) != visual.dim(0) || audio.dim(1) != visual.dim(1)) {
    throw SyncError("audio " + to_string(audio.shape()) + " and video " +
                    to_string(visual.shape()) + " are not frame-synchronous");
  }
  CostScope scope("fusion");
  return concat({audio, visual}, 2);
}

AvModel::AvModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  cfg_.vit.output_dim = cfg_.visual_dim;
  cfg_.vgg.output_dim = cfg_.visual_dim;
  Rng rng(seed);
  if (cfg_.front_end == FrontEnd::kVgg21d) vgg_ = Vgg21d(ps_, cfg_.vgg, rng);
  if (cfg_.front_end == FrontEnd::kVit) vit_ = VitFrontend(ps_, cfg_.vit, rng);
  enc_in_ = Linear(ps_, "encoder.input", cfg_.fused_dim(), cfg_.encoder.width, rng);
  encoder_ = TransformerStack(ps_, "encoder", cfg_.encoder, rng);
  embed_ = ps_.create("pred.embed/table", {cfg_.vocab, cfg_.pred_embed}, Init::normal(1.0), rng);
  for (int i = 0; i < cfg_.pred_layers; ++i) {
    lstm_.emplace_back(ps_, "pred.lstm" + std::to_string(i), i == 0 ? cfg_.pred_embed : cfg_.pred_units,
                       cfg_.pred_units, rng);
  }
  joint_enc_ = Linear(ps_, "joint.enc", cfg_.encoder.width, cfg_.joint_dim, rng);
  joint_pred_ = Linear(ps_, "joint.pred", cfg_.pred_units, cfg_.joint_dim, rng, false);
  joint_out_ = Linear(ps_, "joint.out", cfg_.joint_dim, cfg_.vocab, rng);
}

Tensor AvModel::visual_features(const Tensor& video) const {
  switch (cfg_.front_end) {
    case FrontEnd::kVgg21d:
      return vgg_(video);
    case FrontEnd::kVit:
      return vit_(video);
    case FrontEnd::kAudioOnly:
      break;
  }
  return {};
}

Tensor AvModel::encode(const Tensor& audio, const Tensor& video) const {
  if (audio.rank() != 3 || audio.dim(2) != kAudioDim) {
    throw DimensionError("audio features must be [B x T x 240], got " + to_string(audio.shape()));
  }
  Tensor fused = audio;
  if (cfg_.front_end != FrontEnd::kAudioOnly) {
    if (!video.defined()) throw InputError("this model needs video input");
    fused = fuse_concat(audio, visual_features(video));
  }
  return encoder_(enc_in_(fused));
}

Tensor AvModel::prediction(std::span<const std::int64_t> labels) const {
  std::vector<std::int64_t> ids{kBlank};
  for (auto y : labels) {
    if (y <= kBlank || y >= cfg_.vocab) throw InputError("label id " + std::to_string(y) + " invalid");
    ids.push_back(y);
  }
  Tensor x;
  {
    CostScope scope("pred.embed");
    x = gather_rows(embed_, ids);
  }
  for (const auto& l : lstm_) x = l.run(x);
  return x;
}

Tensor AvModel::joint_log_probs(const Tensor& enc, const Tensor& pred) const {
  Tensor e = joint_enc_(enc);
  Tensor p = joint_pred_(pred);
  Tensor h;
  {
    CostScope scope("joint");
    h = tanh(outer_add(e, p));
  }
  Tensor logits = joint_out_(h);
  CostScope scope("joint");
  return log_softmax(logits);
}

Tensor AvModel::loss(const Batch& batch) const {
  const auto b = batch.size(), t = batch.steps();
  if (static_cast<std::int64_t>(batch.labels.size()) != b) {
    throw InputError("batch has " + std::to_string(batch.labels.size()) + " label sequences for " +
                     std::to_string(b) + " utterances");
  }
  Tensor enc = encode(batch.audio, batch.video);
  Tensor total;
  for (std::int64_t i = 0; i < b; ++i) {
    Tensor enc_i;
    {
      CostScope scope("joint");
      enc_i = reshape(slice(enc, 0, i, i + 1), {t, cfg_.encoder.width});
    }
    Tensor lp = joint_log_probs(enc_i, prediction(batch.labels[i]));
    CostScope scope("loss");
    Tensor l = rnnt_loss(lp, batch.labels[i]);
    total = total.defined() ? add(total, l) : l;
  }
  CostScope scope("loss");
  return scale(total, 1.0 / static_cast<double>(b));
}

class AvModel::Scorer : public TransducerScorer {
 public:
  Scorer(const AvModel& m, Tensor enc) : m_(m), enc_proj_(m.joint_enc_(enc)) {}

  std::int64_t frames() const override { return enc_proj_.dim(0); }

  State initial() const override {
    State s;
    for (const auto& l : m_.lstm_) {
      const auto z = l.zero_state();
      s.tensors.push_back(z.h);
      s.tensors.push_back(z.c);
    }
    return advance(s, kBlank);
  }

  State advance(const State& s, std::int64_t label) const override {
    const std::int64_t id[1] = {label};
    Tensor x = gather_rows(m_.embed_, id);
    State next;
    for (std::size_t i = 0; i < m_.lstm_.size(); ++i) {
      const LstmState st = m_.lstm_[i].step(x, {s.tensors[2 * i], s.tensors[2 * i + 1]});
      next.tensors.push_back(st.h);
      next.tensors.push_back(st.c);
      x = st.h;
    }
    return next;
  }

  std::vector<double> scores(std::int64_t t, const State& s) const override {
    Tensor e = slice(enc_proj_, 0, t, t + 1);
    Tensor h = tanh(add(e, m_.joint_pred_(s.tensors[s.tensors.size() - 2])));
    Tensor lp = log_softmax(m_.joint_out_(h));
    return {lp.values().begin(), lp.values().end()};
  }

 private:
  const AvModel& m_;
  Tensor enc_proj_;
};

std::vector<DecodeResult> AvModel::decode(const Batch& batch) const {
  NoGraphScope none;
  Tensor enc = encode(batch.audio, batch.video);
  const auto b = batch.size(), t = batch.steps();
  std::vector<DecodeResult> out;
  for (std::int64_t i = 0; i < b; ++i) {
    Scorer scorer(*this, reshape(slice(enc, 0, i, i + 1), {t, cfg_.encoder.width}));
    out.push_back(greedy_decode(scorer));
  }
  return out;
}

// ---------------------------------------------------------------------------

CostReport AvModel::count_costs(const ModelConfig& cfg_in, std::int64_t batch,
                                std::int64_t steps, std::int64_t labels) {
  ModelConfig cfg = cfg_in;
  cfg.validate();
  cfg.vit.output_dim = cfg.visual_dim;
  cfg.vgg.output_dim = cfg.visual_dim;
  CostReport r;
  if (cfg.front_end == FrontEnd::kVgg21d) Vgg21d::count_costs(r, cfg.vgg, batch, steps);
  if (cfg.front_end == FrontEnd::kVit) VitFrontend::count_costs(r, cfg.vit, batch, steps);
  const auto rows = batch * steps;
  analytic::linear(r, "encoder.input", rows, cfg.fused_dim(), cfg.encoder.width);
  analytic::transformer(r, "encoder", cfg.encoder, batch, steps);
  r.add("pred.embed", cfg.vocab * cfg.pred_embed, 0, 0);
  const auto u1 = labels + 1;
  for (int i = 0; i < cfg.pred_layers; ++i) {
    const std::string n = "pred.lstm" + std::to_string(i);
    const auto in = i == 0 ? cfg.pred_embed : cfg.pred_units;
    analytic::lstm_params(r, n, in, cfg.pred_units);
    for (std::int64_t k = 0; k < batch * u1; ++k) analytic::lstm_step(r, n, 1, in, cfg.pred_units);
  }
  const auto nodes = steps * u1;
  // The joint runs once per utterance; its parameters are counted once.
  for (std::int64_t b = 0; b < batch; ++b) {
    analytic::linear(r, "joint.enc", steps, cfg.encoder.width, cfg.joint_dim, true, b == 0);
    analytic::linear(r, "joint.pred", u1, cfg.pred_units, cfg.joint_dim, false, b == 0);
    r.add("joint", 0, 0, 2 * nodes * cfg.joint_dim + nodes * cfg.vocab);  // sum, tanh, log-softmax
    analytic::linear(r, "joint.out", nodes, cfg.joint_dim, cfg.vocab, true, b == 0);
    r.add("loss", 0, 0, 2 * nodes);
  }
  r.add("loss", 0, 0, batch);  // utterance sum and mean
  return r;
}

CostReport AvModel::instrumented_costs(const Batch& batch) const {
  Graph g(Graph::Mode::kCountOnly);
  {
    GraphScope scope(g);
    loss(batch);
  }
  CostReport r = g.costs();
  ps_.add_params_to(r);
  return r;
}

}  // namespace avvit
