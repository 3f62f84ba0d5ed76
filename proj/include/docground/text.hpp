// Copyright 2026 The docground Authors.
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

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Unicode-aware string primitives shared by retrieval, grounding and metrics.
// Edit units are Unicode scalar values, never bytes.

namespace docground {

std::u32string to_code_points(std::string_view utf8);
std::string to_utf8(std::u32string_view code_points);
std::size_t code_point_length(std::string_view utf8);

// NFC-normalized, lowercased, whitespace runs collapsed to one space, trimmed.
std::string normalize_for_match(std::string_view text);

// Unit-cost insert/delete/substitute edit distance.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
std::size_t levenshtein(std::string_view a, std::string_view b);

// Maximal runs of alphanumeric code points of the normalized text.
std::vector<std::string> alnum_tokens(std::string_view text);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split_whitespace(std::string_view text);

}  // namespace docground
