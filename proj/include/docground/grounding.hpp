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
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "docground/compute.hpp"
#include "docground/document.hpp"
#include "docground/retrieval.hpp"

namespace docground {

struct GroundingConfig {
  std::size_t max_fuzzy_distance = 2;
  double semantic_threshold = 0.85;
  std::size_t max_window = 5;

  void validate() const;
};

enum class MatchTier { Exact, Fuzzy, Semantic };

std::string_view to_string(MatchTier tier);

struct GroundingCandidate {
  std::vector<std::string> segment_ids;  // consecutive in reading order
  std::string matched_text;              // raw window text, single-space joined
  MatchTier tier = MatchTier::Exact;
  double score = 0.0;
  std::size_t start = 0;  // reading-order position of the first segment
  bool in_context = false;

  friend bool operator==(const GroundingCandidate&, const GroundingCandidate&) = default;
};

struct GroundingOutcome {
  GroundedAnswer answer;
  std::optional<GroundingCandidate> winner;
  std::vector<std::string> warnings;
};

// Tiered alignment of an answer to runs of 1..max_window consecutive segments.
// EXACT: normalized window equals the answer, or the answer is a whole-token
// substring of one segment. FUZZY: levenshtein <= max_fuzzy_distance, score
// 1 - d / max_len. SEMANTIC: cosine >= semantic_threshold. The first
// non-empty tier wins; within it candidates overlapping `context_ids` come
// first, then higher score, shorter window, earlier start.
GroundingOutcome ground_answer(std::string_view answer_text, const DocumentRecord& doc,
                               const std::unordered_set<std::string>& context_ids,
                               EmbeddingProvider& provider, const GroundingConfig& config);

// Regions are the operand segment boxes in operand order; confidence 1.0.
// Throws ConsistencyError for an operand whose segment is not in doc.
GroundedAnswer ground_operands(const ComputeRequest& request, const DocumentRecord& doc,
                               std::string answer_text);

// Candidate ordering used inside one tier; true when a ranks before b.
bool candidate_precedes(const GroundingCandidate& a, const GroundingCandidate& b);

}  // namespace docground
