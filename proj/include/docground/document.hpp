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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "docground/geometry.hpp"

namespace docground {

// Literal reply meaning "the document does not support an answer".
inline constexpr std::string_view kNoAnswerSentinel = "No answer found";

struct TextSegment {
  std::string id;
  std::string text;
  BBox bbox;
  double confidence = 1.0;
  std::size_t order_index = 0;

  friend bool operator==(const TextSegment&, const TextSegment&) = default;
};

// One page of OCR output. Segments are kept sorted by order_index.
struct DocumentRecord {
  std::string doc_id;
  std::optional<std::string> image_ref;
  double page_width = 0.0;
  double page_height = 0.0;
  std::vector<TextSegment> segments;

  const TextSegment* find_segment(std::string_view id) const;

  // Throws ParseError naming the first violated invariant.
  void validate() const;

  friend bool operator==(const DocumentRecord&, const DocumentRecord&) = default;
};

struct Question {
  std::string question_id;
  std::string text;
  std::string doc_id;

  friend bool operator==(const Question&, const Question&) = default;
};

enum class GroundingMethod { Exact, Fuzzy, Semantic, Operands, None };

std::string_view to_string(GroundingMethod method);
GroundingMethod grounding_method_from_string(std::string_view name);

struct GroundedAnswer {
  // nullopt is the distinguished NO_ANSWER value.
  std::optional<std::string> text;
  std::vector<BBox> regions;
  std::optional<BBox> merged_region;
  GroundingMethod method = GroundingMethod::None;
  double confidence = 0.0;

  bool is_no_answer() const { return !text.has_value(); }
  // Display form: the answer text, or the no-answer sentinel.
  std::string display_text() const;

  static GroundedAnswer no_answer() { return {}; }
  // Answer text that could not be located on the page.
  static GroundedAnswer ungrounded(std::string answer);

  friend bool operator==(const GroundedAnswer&, const GroundedAnswer&) = default;
};

// True when text contains at least one non-whitespace character.
bool has_visible_text(std::string_view text);

}  // namespace docground
