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

#include <filesystem>
#include <string>
#include <vector>

namespace avvit {

// A rectangular table of preformatted cells, rendered either as aligned UTF-8
// text or as RFC 4180 CSV. Both renderings share the same cell strings, so
// the numbers in the two outputs are identical by construction.
class Table {
 public:
  explicit Table(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);  // DimensionError on a width mismatch
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string to_text() const;
  std::string to_csv() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// One CSV field, quoted when it contains a comma, quote, CR or LF.
std::string csv_field(const std::string& s);

// Fixed-point rendering with `digits` decimals.
std::string fixed(double v, int digits);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace avvit
