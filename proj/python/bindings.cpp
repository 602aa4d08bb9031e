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

// Python bindings: NumPy in, NumPy out, for the feature pipeline, the
// transducer loss, the schedule, cost accounting and small-model training.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <vector>

#include "avvit/audio.hpp"
#include "avvit/checkpoint.hpp"
#include "avvit/config.hpp"
#include "avvit/error.hpp"
#include "avvit/graph.hpp"
#include "avvit/model.hpp"
#include "avvit/ops.hpp"
#include "avvit/rnnt.hpp"
#include "avvit/text.hpp"
#include "avvit/train.hpp"
#include "avvit/video.hpp"

namespace py = pybind11;
using namespace avvit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  if (shape.empty()) shape = {1};
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Array to_array(std::span<const double> v, const Shape& shape) {
  Array out(std::vector<py::ssize_t>(shape.begin(), shape.end()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Waveform to_waveform(const Array& samples, int sample_rate) {
  if (samples.ndim() != 1) throw DimensionError("waveform must be 1-D");
  Waveform w;
  w.samples.assign(samples.data(), samples.data() + samples.size());
  w.sample_rate = sample_rate;
  return w;
}

py::dict cost_dict(const CostReport& r) {
  py::dict layers;
  for (const auto& c : r.normalized().per_layer) {
    layers[py::str(c.name)] = py::make_tuple(c.params, c.mult_adds, c.flops);
  }
  py::dict d;
  d["params"] = r.params;
  d["mult_adds"] = r.mult_adds;
  d["flops"] = r.flops;
  d["layers"] = layers;
  return d;
}

ModelConfig model_config(const std::string& preset, const std::string& front_end) {
  ModelConfig c = ModelConfig::preset_named(preset);
  c.front_end = parse_front_end(front_end);
  return c;
}

// A model plus its trainer, so Python can train, evaluate and save.
class PyModel {
 public:
  PyModel(const std::string& front_end, std::uint64_t seed, const std::string& config)
      : kv_(KeyValues::parse(config)) {
    if (!kv_.has("preset")) kv_.set("preset", "desk");
    cfg_ = ModelConfig::from(kv_);
    cfg_.front_end = parse_front_end(front_end);
    model_ = std::make_unique<AvModel>(cfg_, seed);
  }

  py::dict train(std::int64_t steps, double target_wer, bool video_only, std::uint64_t task_seed) {
    TrainConfig tc = TrainConfig::preset_named("desk");
    tc.steps = steps;
    tc.target_wer = target_wer;
    if (video_only) tc.noise_prob = 0.0;
    TaskConfig task_cfg;
    task_cfg.seed = task_seed;
    task_cfg.video_only = video_only;
    const SyntheticTask task(task_cfg);
    Trainer trainer(*model_, tc, cfg_.to_text() + tc.to_text());
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = trainer.run(task);
    }
    py::list losses;
    for (const auto& rec : r.records) losses.append(rec.loss);
    py::list probes;
    for (const auto& [step, w] : r.wer_probes) probes.append(py::make_tuple(step, w));
    py::dict d;
    d["steps_run"] = r.steps_run;
    d["reached_target"] = r.reached_target;
    d["losses"] = losses;
    d["wer_probes"] = probes;
    return d;
  }

  double evaluate(const std::string& condition, bool video_only, std::uint64_t task_seed) {
    TaskConfig task_cfg;
    task_cfg.seed = task_seed;
    task_cfg.video_only = video_only;
    const SyntheticTask task(task_cfg);
    for (const auto& c : Condition::grid()) {
      if (c.label() == condition) return evaluate_wer(*model_, task, c);
    }
    throw InputError("unknown condition '" + condition + "'");
  }

  double loss(const Array& audio, const py::object& video,
              const std::vector<std::vector<std::int64_t>>& labels) const {
    Batch b;
    b.audio = to_tensor(audio);
    if (!video.is_none()) b.video = to_tensor(video.cast<Array>());
    b.labels = labels;
    NoGraphScope none;
    return model_->loss(b).item();
  }

  std::int64_t num_params() const { return model_->params().total(); }
  py::dict costs(std::int64_t batch, std::int64_t steps, std::int64_t labels) const {
    return cost_dict(AvModel::count_costs(cfg_, batch, steps, labels));
  }
  std::string config_text() const { return cfg_.to_text(); }
  void save(const std::string& path) const {
    Checkpoint ck;
    ck.config_text = cfg_.to_text();
    for (const auto& [name, t] : model_->params().entries()) ck.blobs.emplace_back(name, t);
    write_checkpoint(path, ck);
  }
  void load(const std::string& path) { load_params(model_->params(), read_checkpoint(path)); }

 private:
  KeyValues kv_;
  ModelConfig cfg_;
  std::unique_ptr<AvModel> model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Audio-visual transducer toolkit (double precision, CPU).";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
  py::register_exception<SyncError>(m, "SyncError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.attr("SAMPLE_RATE") = kSampleRate;
  m.attr("FEATURE_RATE") = kFeatureRate;
  m.attr("AUDIO_DIM") = kAudioDim;
  m.attr("FRAME_SIZE") = kFrameSize;

  m.def(
      "acoustic_features",
      [](const Array& samples, int sample_rate) {
        return to_array(compute_features(to_waveform(samples, sample_rate)).data);
      },
      py::arg("samples"), py::arg("sample_rate") = kSampleRate,
      "Log-mel features stacked to [1 x T x 240] at 30 ms per step.");
  m.def(
      "log_mel80",
      [](const Array& samples, int sample_rate) {
        return to_array(log_mel80(frame_hann(to_waveform(samples, sample_rate))));
      },
      py::arg("samples"), py::arg("sample_rate") = kSampleRate, "[N x 80] log-mel frames at 10 ms.");
  m.def(
      "mix_at_snr",
      [](const Array& clean, const Array& noise, double snr_db) {
        const Waveform w = mix_at_snr(to_waveform(clean, kSampleRate), to_waveform(noise, kSampleRate), snr_db);
        return to_array(w.samples, {static_cast<std::int64_t>(w.samples.size())});
      },
      py::arg("clean"), py::arg("noise"), py::arg("snr_db"));
  m.def(
      "resample_nn",
      [](const Array& frames, double fps, double target_rate, std::optional<std::int64_t> out_frames) {
        VideoClip v{to_tensor(frames), fps};
        return to_array(resample_nn(v, target_rate, out_frames).frames);
      },
      py::arg("frames"), py::arg("fps"), py::arg("target_rate") = kFeatureRate,
      py::arg("out_frames") = py::none());
  m.def(
      "extract_tubelets",
      [](const Array& frames, bool causal) {
        TubeletConfig cfg;
        cfg.alignment = causal ? TubeletAlignment::kCausal : TubeletAlignment::kCentered;
        return to_array(extract_tubelets(VideoClip{to_tensor(frames), kFeatureRate}, cfg));
      },
      py::arg("frames"), py::arg("causal") = false);

  m.def(
      "rnnt_loss",
      [](const Array& log_probs, const std::vector<std::int64_t>& labels) {
        Tensor lp = to_tensor(log_probs);
        lp.set_requires_grad(true);
        Graph g;
        double loss = 0.0;
        {
          GraphScope scope(g);
          const Tensor l = rnnt_loss(lp, labels);
          loss = l.item();
          backward(g, l);
        }
        return py::make_tuple(loss, to_array(lp.grad(), lp.shape()));
      },
      py::arg("log_probs"), py::arg("labels"),
      "Returns (loss, d loss / d log_probs) for a [T x (U+1) x V] lattice.");

  m.def(
      "lr_at",
      [](double step, const std::string& schedule) {
        if (schedule == "paper") return LrSchedule::paper().lr_at(step);
        if (schedule == "finetune") return LrSchedule::finetune().lr_at(step);
        throw ConfigError("unknown schedule '" + schedule + "' (expected paper or finetune)");
      },
      py::arg("step"), py::arg("schedule") = "paper");

  m.def("wer", &wer, py::arg("reference"), py::arg("hypothesis"));

  m.def(
      "count_costs",
      [](const std::string& preset, const std::string& front_end, std::int64_t batch,
         std::int64_t steps, std::int64_t labels) {
        return cost_dict(AvModel::count_costs(model_config(preset, front_end), batch, steps, labels));
      },
      py::arg("preset") = "desk", py::arg("front_end") = "vit", py::arg("batch") = 1,
      py::arg("steps") = 32, py::arg("labels") = 5);

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&, std::uint64_t, const std::string&>(), py::arg("front_end") = "vit",
           py::arg("seed") = 1, py::arg("config") = "",
           "A model built from a preset (desk by default) plus flat key = value overrides.")
      .def("train", &PyModel::train, py::arg("steps") = 2000, py::arg("target_wer") = 0.0,
           py::arg("video_only") = false, py::arg("task_seed") = 1,
           "Trains on the synthetic task; returns losses and WER probes.")
      .def("evaluate", &PyModel::evaluate, py::arg("condition") = "∞dB", py::arg("video_only") = false,
           py::arg("task_seed") = 1, "Greedy-decode WER on the synthetic task under one condition.")
      .def("loss", &PyModel::loss, py::arg("audio"), py::arg("video") = py::none(), py::arg("labels"))
      .def("costs", &PyModel::costs, py::arg("batch") = 1, py::arg("steps") = 32, py::arg("labels") = 5)
      .def("save", &PyModel::save, py::arg("path"))
      .def("load", &PyModel::load, py::arg("path"))
      .def_property_readonly("num_params", &PyModel::num_params)
      .def_property_readonly("config_text", &PyModel::config_text);
}
