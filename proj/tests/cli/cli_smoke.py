# Copyright 2026 The avvit Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""End-to-end checks of the avvit command-line tool."""

import csv
import json
import pathlib
import subprocess
import sys
import tempfile

CLI = sys.argv[1]


def run(*args, expect=0):
    proc = subprocess.run([CLI, *args], capture_output=True, text=True)
    if proc.returncode != expect:
        sys.exit(f"{' '.join(args)}: exit {proc.returncode}, expected {expect}\n{proc.stdout}\n{proc.stderr}")
    return proc


def check(cond, what):
    if not cond:
        sys.exit(f"check failed: {what}")
    print(f"ok: {what}")


def csv_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        data = f.read()
    check("\r\n" in data, f"{path.name} uses CRLF line endings")
    return list(csv.reader(data.splitlines()))


def csv_numbers_in_text(csv_path, text_path):
    # Every cell of the CSV appears verbatim in the text table.
    text = text_path.read_text(encoding="utf-8")
    for row in csv_rows(csv_path)[1:]:
        for cell in row:
            if cell and cell not in text:
                sys.exit(f"{csv_path.name} cell '{cell}' missing from {text_path.name}")
    print(f"ok: {csv_path.name} and {text_path.name} agree")


with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)
    cfg = tmp / "run.cfg"
    cfg.write_text("# toy run\npreset = desk\nsteps = 12\neval_every = 6\ntask_samples = 8\n")

    run("gen-data", "--config", str(cfg), "--seed", "3", "--out", str(tmp / "data"))
    manifest = csv_rows(tmp / "data" / "manifest.csv")
    check(len(manifest) == 9, "gen-data writes one manifest row per sample")
    check((tmp / "data" / "audio" / "00000.wav").stat().st_size > 44, "gen-data writes audio")
    check(any((tmp / "data" / "video").iterdir()), "gen-data writes video")

    run("train", "--config", str(cfg), "--seed", "5", "--front-end", "audio-only", "--out", str(tmp / "run"))
    log = [json.loads(l) for l in (tmp / "run" / "train_log.jsonl").read_text().splitlines()]
    check(len(log) == 12 and log[-1]["step"] == 11, "train logs every step")
    check((tmp / "run" / "model.ckpt").exists(), "train writes a checkpoint")
    csv_numbers_in_text(tmp / "run" / "train_report.csv", tmp / "run" / "train_report.txt")

    run("eval", "--checkpoint", str(tmp / "run" / "model.ckpt"), "--out", str(tmp / "eval"))
    grid = csv_rows(tmp / "eval" / "eval.csv")
    check(len(grid) >= 2 and len(grid[0]) >= 5, "eval writes a WER grid")
    csv_numbers_in_text(tmp / "eval" / "eval.csv", tmp / "eval" / "eval.txt")

    run("profile", "--config", str(cfg), "--front-end", "audio-only", "--out", str(tmp / "prof"))
    rows = csv_rows(tmp / "prof" / "profile.csv")
    match = rows[0].index("instrumented_match")
    check(all(r[match] == "yes" for r in rows[1:]), "profile analytic counts match instrumented counts")
    csv_numbers_in_text(tmp / "prof" / "profile.csv", tmp / "prof" / "profile.txt")

    bad = tmp / "bad.cfg"
    bad.write_text("preset = desk\nno_such_key = 1\n")
    proc = run("train", "--config", str(bad), "--out", str(tmp / "bad"), expect=2)
    err = json.loads((tmp / "bad" / "error.json").read_text())
    check("no_such_key" in json.dumps(err), "unknown config keys exit 2 with an error record")
    run("eval", "--checkpoint", str(tmp / "missing.ckpt"), "--out", str(tmp / "bad2"), expect=2)
    check(True, "missing checkpoint is a usage error")

print("cli smoke: all checks passed")
