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

#include "avvit/text.hpp"

#include <algorithm>
#include <sstream>

#include "avvit/error.hpp"

namespace avvit {

Vocabulary Vocabulary::characters() { return Vocabulary(" 'abcdefghijklmnopqrstuvwxyz"); }

Vocabulary::Vocabulary(std::string symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw ConfigError("vocabulary needs at least one symbol");
}

std::vector<std::int64_t> Vocabulary::encode(std::string_view text) const {
  std::vector<std::int64_t> ids;
  ids.reserve(text.size());
  for (char c : text) {
    const auto pos = symbols_.find(c);
    if (pos == std::string::npos) {
      throw InputError(std::string("character '") + c + "' is not in the vocabulary");
    }
    ids.push_back(static_cast<std::int64_t>(pos) + 1);
  }
  return ids;
}

std::string Vocabulary::decode(const std::vector<std::int64_t>& ids) const {
  std::string out;
  for (auto id : ids) {
    if (id <= 0 || id >= size()) throw InputError("token id " + std::to_string(id) + " invalid");
    out.push_back(symbols_[static_cast<std::size_t>(id - 1)]);
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::vector<std::string> words;
  for (std::string w; is >> w;) words.push_back(w);
  return words;
}

std::int64_t word_edit_distance(const std::vector<std::string>& a,
                                const std::vector<std::string>& b) {
  std::vector<std::int64_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<std::int64_t>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double wer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = split_words(reference);
  if (ref.empty()) throw InputError("WER needs a non-empty reference");
  return static_cast<double>(word_edit_distance(ref, split_words(hypothesis))) /
         static_cast<double>(ref.size());
}

double corpus_wer(const std::vector<std::string>& references,
                  const std::vector<std::string>& hypotheses) {
  if (references.size() != hypotheses.size()) {
    throw InputError("reference and hypothesis counts differ");
  }
  std::int64_t edits = 0, words = 0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    const auto ref = split_words(references[i]);
    edits += word_edit_distance(ref, split_words(hypotheses[i]));
    words += static_cast<std::int64_t>(ref.size());
  }
  if (words == 0) throw InputError("WER needs a non-empty reference");
  return static_cast<double>(edits) / static_cast<double>(words);
}

}  // namespace avvit
