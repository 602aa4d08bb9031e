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
#include <string>
#include <string_view>
#include <vector>

namespace avvit {

// Character vocabulary with the transducer blank at id 0.
class Vocabulary {
 public:
  // Blank, space, apostrophe, a-z.
  static Vocabulary characters();
  explicit Vocabulary(std::string symbols);

  std::int64_t size() const { return static_cast<std::int64_t>(symbols_.size()) + 1; }
  // Throws InputError for characters outside the vocabulary.
  std::vector<std::int64_t> encode(std::string_view text) const;
  // Throws InputError for blank or out-of-range ids.
  std::string decode(const std::vector<std::int64_t>& ids) const;

 private:
  std::string symbols_;  // id i+1 -> symbols_[i]
};

std::vector<std::string> split_words(std::string_view text);

// Levenshtein distance over whole words.
std::int64_t word_edit_distance(const std::vector<std::string>& a,
                                const std::vector<std::string>& b);

// Word error rate: edit distance / reference length. Empty reference
// throws InputError.
double wer(std::string_view reference, std::string_view hypothesis);

// Corpus-level rate: total edits over total reference words.
double corpus_wer(const std::vector<std::string>& references,
                  const std::vector<std::string>& hypotheses);

}  // namespace avvit
