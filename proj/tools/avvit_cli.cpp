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

// avvit: profile, train, evaluate and generate data for the audio-visual
// transducer. See README.md for the configuration keys.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "avvit/audio.hpp"
#include "avvit/checkpoint.hpp"
#include "avvit/error.hpp"
#include "avvit/profile.hpp"
#include "avvit/report.hpp"
#include "avvit/run_config.hpp"
#include "avvit/train.hpp"
#include "avvit/video.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace avvit;

namespace {

// Raised for bad invocations (exit code 2), as opposed to runtime failures.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string command;
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> front_end;
  std::optional<fs::path> out;
  std::optional<fs::path> checkpoint;
  std::optional<fs::path> resume;
};

RunConfig resolve(const Options& o) {
  RunConfig rc = o.config ? RunConfig::load(*o.config) : RunConfig::from(KeyValues{});
  if (o.seed) rc.train.seed = *o.seed;
  if (o.front_end && *o.front_end != "all") rc.model.front_end = parse_front_end(*o.front_end);
  return rc;
}

std::vector<FrontEnd> selected_front_ends(const Options& o, const RunConfig& rc) {
  if (!o.front_end) {
    return o.config ? std::vector<FrontEnd>{rc.model.front_end}
                    : std::vector<FrontEnd>{FrontEnd::kVgg21d, FrontEnd::kVit};
  }
  if (*o.front_end == "all") return {FrontEnd::kVgg21d, FrontEnd::kVit, FrontEnd::kAudioOnly};
  std::vector<FrontEnd> out;
  std::stringstream ss(*o.front_end);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_front_end(item));
  return out;
}

void emit(const std::optional<fs::path>& out, const std::string& stem, const Table& t,
          const std::string& footer) {
  const std::string text = t.to_text() + (footer.empty() ? "" : "\n" + footer);
  std::cout << text << std::flush;
  if (out) {
    write_text_file(*out / (stem + ".txt"), text);
    write_text_file(*out / (stem + ".csv"), t.to_csv());
  }
}

int cmd_profile(const Options& o) {
  RunConfig rc = resolve(o);
  const auto fes = selected_front_ends(o, rc);
  const auto rows = profile(rc.model, fes, rc.profile, rc.train.seed);
  const auto rep = format_profile(rc.model, rc.profile, rows);
  emit(o.out, "profile", rep.table, rep.footer);
  for (const auto& r : rows) {
    if (!r.consistent()) {
      throw ContractError("analytic and instrumented costs differ for " + r.name + ":\n" +
                          diff_reports(r.analytic.normalized(), r.instrumented.normalized()));
    }
  }
  return 0;
}

std::string run_config_text(const RunConfig& rc) { return rc.to_text(); }

int cmd_train(const Options& o) {
  if (!o.out) throw UsageError("train needs --out <dir>");
  RunConfig rc = resolve(o);
  fs::create_directories(*o.out);
  write_text_file(*o.out / "config.txt", run_config_text(rc));
  const SyntheticTask task(rc.task);
  AvModel model(rc.model, rc.train.seed);
  Trainer trainer(model, rc.train, run_config_text(rc));
  const fs::path log = *o.out / "train_log.jsonl";
  if (o.resume) {
    if (!fs::exists(*o.resume)) throw UsageError("checkpoint " + o.resume->string() + " does not exist");
    trainer.restore(read_checkpoint(*o.resume));
  } else {
    fs::remove(log);
  }
  const auto res = trainer.run(task, {log, *o.out / "model.ckpt", *o.out / "diagnostics"});

  Table t({"step", "training_wer"});
  for (const auto& [step, w] : res.wer_probes) t.add_row({std::to_string(step), fixed(w, 4)});
  std::ostringstream foot;
  foot << "front end: " << to_string(rc.model.front_end) << ", steps run: " << res.steps_run
       << ", final step: " << trainer.step() << ", parameters: " << model.params().total() << '\n';
  if (!res.records.empty()) foot << "last loss: " << fixed(res.records.back().loss, 6) << '\n';
  if (rc.train.target_wer > 0) {
    foot << "target WER " << fixed(rc.train.target_wer, 4) << (res.reached_target ? " reached" : " not reached")
         << '\n';
  }
  emit(o.out, "train_report", t, foot.str());
  return 0;
}

int cmd_eval(const Options& o) {
  if (!o.checkpoint) throw UsageError("eval needs --checkpoint <file>");
  if (!fs::exists(*o.checkpoint)) {
    throw UsageError("checkpoint " + o.checkpoint->string() + " does not exist");
  }
  const Checkpoint ck = read_checkpoint(*o.checkpoint);
  KeyValues kv = KeyValues::parse(ck.config_text);
  if (o.config) {
    for (const auto& [k, v] : KeyValues::load(*o.config).entries()) kv.set(k, v);
  }
  RunConfig rc = RunConfig::from(kv);
  if (o.front_end && parse_front_end(*o.front_end) != rc.model.front_end) {
    throw UsageError("checkpoint holds a " + to_string(rc.model.front_end) + " model");
  }
  AvModel model(rc.model, rc.train.seed);
  load_params(model.params(), ck);
  const SyntheticTask task(rc.task);
  std::vector<std::string> header{"model", "step"};
  std::vector<std::string> row{to_string(rc.model.front_end), std::to_string(ck.step)};
  for (const auto& c : Condition::grid()) {
    header.push_back(c.label());
    row.push_back(fixed(100.0 * evaluate_wer(model, task, c, rc.eval_noise_seed), 2));
  }
  Table t(header);
  t.add_row(row);
  emit(o.out, "eval", t,
       "WER in percent over " + std::to_string(task.size()) +
           " synthetic utterances, greedy decoding; SNR columns mix babble noise.\n");
  return 0;
}

// 8-bit RGB from normalized pixels.
std::vector<std::uint8_t> to_rgb24(const Tensor& frames) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(frames.size()));
  auto v = frames.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double p = std::round((v[i] + 1.0) * 127.5);
    out[i] = static_cast<std::uint8_t>(std::clamp(p, 0.0, 255.0));
  }
  return out;
}

int cmd_gen_data(const Options& o) {
  if (!o.out) throw UsageError("gen-data needs --out <dir>");
  RunConfig rc = resolve(o);
  if (o.seed) rc.task.seed = *o.seed;
  const SyntheticTask task(rc.task);
  fs::create_directories(*o.out / "audio");
  fs::create_directories(*o.out / "video");
  Table manifest({"id", "transcript", "audio", "video", "feature_blob"});
  Checkpoint features;
  features.config_text = rc.task.to_text();
  for (std::int64_t i = 0; i < task.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "%05lld", static_cast<long long>(i));
    const std::string wav = std::string("audio/") + id + ".wav";
    const std::string vid = std::string("video/") + id + ".avvr";
    write_wav(*o.out / wav, task.audio(i));
    const VideoClip src = task.source_video(i);
    RawVideo raw;
    raw.width = static_cast<std::uint32_t>(kFrameSize);
    raw.height = static_cast<std::uint32_t>(kFrameSize);
    raw.fps_num = static_cast<std::uint32_t>(kSourceFps);
    raw.fps_den = 1;
    raw.rgb = to_rgb24(src.frames);
    write_raw_video(*o.out / vid, raw);
    const std::string blob = std::string("features/") + id;
    features.blobs.emplace_back(blob, compute_features(task.audio(i)).data);
    manifest.add_row({id, task.transcript(i), wav, vid, blob});
  }
  write_checkpoint(*o.out / "features.bin", features);
  write_text_file(*o.out / "manifest.csv", manifest.to_csv());
  std::cout << "wrote " << task.size() << " utterances (" << task.steps() << " steps, "
            << task.source_video(0).num_frames() << " source frames at " << kSourceFps
            << " fps) to " << o.out->string() << '\n';
  return 0;
}

void error_record(const Options& o, const std::string& kind, const std::string& message, int code) {
  nlohmann::json rec{{"status", "error"}, {"command", o.command}, {"kind", kind},
                     {"message", message}, {"exit_code", code}};
  std::cerr << rec.dump() << std::endl;
  if (o.out) {
    std::error_code ec;
    fs::create_directories(*o.out, ec);
    std::ofstream(*o.out / "error.json") << rec.dump(2) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  keep_large_allocations_mapped();
  CLI::App app{"avvit: audio-visual transducer toolkit"};
  app.require_subcommand(1);
  Options o;
  std::string config, front_end, out, checkpoint, resume;
  std::uint64_t seed = 0;
  auto common = [&](CLI::App* sub, bool with_front_end) {
    sub->add_option("--config", config, "flat key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "run seed (training and initialization; task seed for gen-data)");
    if (with_front_end) {
      sub->add_option("--front-end", front_end, "vgg21d | vit | audio-only (profile: comma list or all)");
    }
    sub->add_option("--out", out, "output directory");
  };
  auto* profile_cmd = app.add_subcommand("profile", "analytic and measured cost table");
  common(profile_cmd, true);
  auto* train_cmd = app.add_subcommand("train", "train on the synthetic task");
  common(train_cmd, true);
  train_cmd->add_option("--resume", resume, "checkpoint to resume from");
  auto* eval_cmd = app.add_subcommand("eval", "WER grid over noise conditions");
  common(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint");
  auto* gen_cmd = app.add_subcommand("gen-data", "write the synthetic task to disk");
  common(gen_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    o.command = app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name();
    error_record(o, "usage", e.what(), 2);
    return 2;
  }
  CLI::App* sub = app.get_subcommands().front();
  o.command = sub->get_name();
  auto given = [&](const char* name) {
    const CLI::Option* opt = sub->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--config")) o.config = config;
  if (given("--seed")) o.seed = seed;
  if (given("--front-end")) o.front_end = front_end;
  if (given("--out")) o.out = out;
  if (given("--checkpoint")) o.checkpoint = checkpoint;
  if (given("--resume")) o.resume = resume;

  try {
    if (o.command == "profile") return cmd_profile(o);
    if (o.command == "train") return cmd_train(o);
    if (o.command == "eval") return cmd_eval(o);
    return cmd_gen_data(o);
  } catch (const UsageError& e) {
    error_record(o, "usage", e.what(), 2);
    return 2;
  } catch (const ConfigError& e) {
    error_record(o, e.kind(), e.what(), 2);
    return 2;
  } catch (const Error& e) {
    error_record(o, e.kind(), e.what(), 1);
    return 1;
  } catch (const std::exception& e) {
    error_record(o, "internal", e.what(), 1);
    return 1;
  }
}
