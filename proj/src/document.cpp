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

#include "docground/document.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "docground/error.hpp"

namespace docground {

const TextSegment* DocumentRecord::find_segment(std::string_view id) const {
  auto it = std::find_if(segments.begin(), segments.end(),
                         [&](const TextSegment& s) { return s.id == id; });
  return it == segments.end() ? nullptr : &*it;
}

void DocumentRecord::validate() const {
  if (!std::isfinite(page_width) || !std::isfinite(page_height) || page_width < 0.0 ||
      page_height < 0.0) {
    throw ParseError("document '" + doc_id + "': page dimensions must be finite and >= 0");
  }
  std::unordered_set<std::string_view> ids;
  std::unordered_set<std::size_t> orders;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const TextSegment& s = segments[i];
    const std::string where = "document '" + doc_id + "' segments[" + std::to_string(i) + "]";
    if (s.id.empty()) throw ParseError(where + ".id: empty");
    if (!ids.insert(s.id).second) throw ParseError(where + ".id: duplicate '" + s.id + "'");
    if (!has_visible_text(s.text)) throw ParseError(where + ".text: empty after trimming");
    if (!s.bbox.valid()) throw ParseError(where + ".bbox: invalid " + to_string(s.bbox));
    if (!s.bbox.within_page(page_width, page_height)) {
      throw ParseError(where + ".bbox: " + to_string(s.bbox) + " outside page");
    }
    if (!(s.confidence >= 0.0 && s.confidence <= 1.0)) {
      throw ParseError(where + ".confidence: outside [0,1]");
    }
    if (!orders.insert(s.order_index).second) {
      throw ParseError(where + ".order_index: duplicate " + std::to_string(s.order_index));
    }
    if (i > 0 && segments[i - 1].order_index > s.order_index) {
      throw ParseError(where + ".order_index: segments not sorted by reading order");
    }
  }
}

std::string_view to_string(GroundingMethod method) {
  switch (method) {
    case GroundingMethod::Exact: return "EXACT";
    case GroundingMethod::Fuzzy: return "FUZZY";
    case GroundingMethod::Semantic: return "SEMANTIC";
    case GroundingMethod::Operands: return "OPERANDS";
    case GroundingMethod::None: return "NONE";
  }
  return "NONE";
}

GroundingMethod grounding_method_from_string(std::string_view name) {
  for (auto m : {GroundingMethod::Exact, GroundingMethod::Fuzzy, GroundingMethod::Semantic,
                 GroundingMethod::Operands, GroundingMethod::None}) {
    if (to_string(m) == name) return m;
  }
  throw ParseError("unknown grounding method '" + std::string(name) + "'");
}

std::string GroundedAnswer::display_text() const {
  return text ? *text : std::string(kNoAnswerSentinel);
}

GroundedAnswer GroundedAnswer::ungrounded(std::string answer) {
  GroundedAnswer out;
  out.text = std::move(answer);
  return out;
}

bool has_visible_text(std::string_view text) {
  // Any non-ASCII byte counts as visible; OCR output is never pure Unicode spaces.
  return std::any_of(text.begin(), text.end(), [](char c) {
    return !std::isspace(static_cast<unsigned char>(c));
  });
}

}  // namespace docground
