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

#include "docground/grounding.hpp"

#include <algorithm>
#include <cmath>

#include "docground/error.hpp"
#include "docground/text.hpp"

namespace docground {

void GroundingConfig::validate() const {
  if (max_window < 1) throw ConfigError("grounding max_window must be >= 1");
  if (!(semantic_threshold >= -1.0 && semantic_threshold <= 1.0)) {
    throw ConfigError("grounding semantic_threshold must lie in [-1, 1]");
  }
}

std::string_view to_string(MatchTier tier) {
  switch (tier) {
    case MatchTier::Exact: return "EXACT";
    case MatchTier::Fuzzy: return "FUZZY";
    case MatchTier::Semantic: return "SEMANTIC";
  }
  return "EXACT";
}

bool candidate_precedes(const GroundingCandidate& a, const GroundingCandidate& b) {
  if (a.in_context != b.in_context) return a.in_context;
  if (a.score != b.score) return a.score > b.score;
  if (a.segment_ids.size() != b.segment_ids.size()) {
    return a.segment_ids.size() < b.segment_ids.size();
  }
  return a.start < b.start;
}

namespace {

struct Window {
  std::size_t start = 0;
  std::size_t length = 0;
  std::string raw;
  std::string normalized;
  bool in_context = false;
};

bool contains_whole_token(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return false;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || haystack[pos - 1] == ' ';
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == haystack.size() || haystack[end] == ' ';
    if (left_ok && right_ok) return true;
  }
  return false;
}

GroundingCandidate make_candidate(const Window& w, const DocumentRecord& doc, MatchTier tier,
                                  double score) {
  GroundingCandidate c;
  for (std::size_t i = w.start; i < w.start + w.length; ++i) {
    c.segment_ids.push_back(doc.segments[i].id);
  }
  c.matched_text = w.raw;
  c.tier = tier;
  c.score = score;
  c.start = w.start;
  c.in_context = w.in_context;
  return c;
}

GroundedAnswer to_answer(std::string answer_text, const GroundingCandidate& c,
                         const DocumentRecord& doc) {
  GroundedAnswer out;
  out.text = std::move(answer_text);
  for (std::size_t i = c.start; i < c.start + c.segment_ids.size(); ++i) {
    out.regions.push_back(doc.segments[i].bbox);
  }
  out.merged_region = bbox_union(out.regions);
  out.method = c.tier == MatchTier::Exact   ? GroundingMethod::Exact
               : c.tier == MatchTier::Fuzzy ? GroundingMethod::Fuzzy
                                            : GroundingMethod::Semantic;
  out.confidence = c.score;
  return out;
}

}  // namespace

GroundingOutcome ground_answer(std::string_view answer_text, const DocumentRecord& doc,
                               const std::unordered_set<std::string>& context_ids,
                               EmbeddingProvider& provider, const GroundingConfig& config) {
  config.validate();
  GroundingOutcome outcome;
  outcome.answer = GroundedAnswer::ungrounded(std::string(answer_text));

  const std::string answer = normalize_for_match(answer_text);
  if (answer.empty() || doc.segments.empty()) return outcome;

  std::vector<Window> windows;
  const std::size_t n = doc.segments.size();
  for (std::size_t start = 0; start < n; ++start) {
    std::string raw;
    bool in_context = false;
    for (std::size_t len = 1; len <= config.max_window && start + len <= n; ++len) {
      const TextSegment& seg = doc.segments[start + len - 1];
      if (len > 1) raw += ' ';
      raw += seg.text;
      in_context = in_context || context_ids.count(seg.id) != 0;
      windows.push_back({start, len, raw, normalize_for_match(raw), in_context});
    }
  }

  auto pick = [&](std::vector<GroundingCandidate>& tier) {
    const auto best = std::min_element(tier.begin(), tier.end(), candidate_precedes);
    outcome.answer = to_answer(std::string(answer_text), *best, doc);
    outcome.winner = *best;
    return true;
  };

  std::vector<GroundingCandidate> tier;
  for (const Window& w : windows) {
    if (w.normalized == answer || (w.length == 1 && contains_whole_token(w.normalized, answer))) {
      tier.push_back(make_candidate(w, doc, MatchTier::Exact, 1.0));
    }
  }
  if (!tier.empty()) {
    pick(tier);
    return outcome;
  }

  const std::u32string answer_cps = to_code_points(answer);
  for (const Window& w : windows) {
    const std::u32string cps = to_code_points(w.normalized);
    const std::size_t diff =
        cps.size() > answer_cps.size() ? cps.size() - answer_cps.size() : answer_cps.size() - cps.size();
    if (diff > config.max_fuzzy_distance) continue;
    const std::size_t d = levenshtein(cps, answer_cps);
    if (d > config.max_fuzzy_distance) continue;
    const double max_len = static_cast<double>(std::max(cps.size(), answer_cps.size()));
    tier.push_back(make_candidate(w, doc, MatchTier::Fuzzy, 1.0 - static_cast<double>(d) / max_len));
  }
  if (!tier.empty()) {
    pick(tier);
    return outcome;
  }

  std::vector<std::string> texts;
  texts.reserve(windows.size() + 1);
  texts.push_back(answer);
  for (const Window& w : windows) texts.push_back(w.normalized);
  std::vector<Embedding> vectors;
  try {
    vectors = provider.embed(texts);
    if (vectors.size() != texts.size()) {
      throw ConsistencyError("embedding provider returned wrong number of vectors");
    }
  } catch (const Error& e) {
    outcome.warnings.push_back(std::string("semantic tier skipped: ") + e.what());
    return outcome;
  }
  // Only EXACT may report full confidence.
  const double below_one = std::nextafter(1.0, 0.0);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const double cos = cosine_similarity(vectors[0], vectors[i + 1]);
    if (cos >= config.semantic_threshold) {
      tier.push_back(make_candidate(windows[i], doc, MatchTier::Semantic,
                                    std::clamp(cos, 0.0, below_one)));
    }
  }
  if (!tier.empty()) pick(tier);
  return outcome;
}

GroundedAnswer ground_operands(const ComputeRequest& request, const DocumentRecord& doc,
                               std::string answer_text) {
  GroundedAnswer out;
  out.text = std::move(answer_text);
  for (const auto& operand : request.operands()) {
    const TextSegment* seg = doc.find_segment(operand.source_segment_id);
    if (!seg) {
      throw ConsistencyError("operand references unknown segment '" + operand.source_segment_id +
                             "' in document '" + doc.doc_id + "'");
    }
    out.regions.push_back(seg->bbox);
  }
  out.merged_region = bbox_union(out.regions);
  out.method = GroundingMethod::Operands;
  out.confidence = 1.0;
  return out;
}

}  // namespace docground
