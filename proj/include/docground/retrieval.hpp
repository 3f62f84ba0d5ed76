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
#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "docground/document.hpp"
#include "docground/service.hpp"

namespace docground {

using Embedding = std::vector<double>;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  // One vector per input text, each of length dimension().
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
};

// Feature-hashed character trigrams of the normalized text, L2-normalized.
// Pure and deterministic: equal text gives a bit-identical vector.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dimension, std::uint64_t seed = 0x5eed);
  std::size_t dimension() const override { return dimension_; }
  std::vector<Embedding> embed(std::span<const std::string> texts) override;
  Embedding embed_one(std::string_view text) const;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

// Throws ConfigError when dimension < 8.
std::shared_ptr<EmbeddingProvider> deterministic_embedder(std::size_t dimension = 384);

// Per-run cache keyed by exact text; makes remote providers deterministic
// within a run and is safe for concurrent use.
class CachingEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit CachingEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner);
  std::size_t dimension() const override { return inner_->dimension(); }
  std::vector<Embedding> embed(std::span<const std::string> texts) override;
  std::size_t cached() const;

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, Embedding> cache_;
};

// Request payload {texts}; response payload {vectors}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(std::shared_ptr<ServiceClient> client, std::size_t dimension);
  std::size_t dimension() const override { return dimension_; }
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

 private:
  std::shared_ptr<ServiceClient> client_;
  std::size_t dimension_;
};

// Throws ConsistencyError on a zero vector or mismatched dimensions.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct RetrievalConfig {
  std::size_t top_k = 5;
  double semantic_cutoff = 0.5;
  std::size_t min_keyword_matches = 2;

  void validate() const;
};

struct RetrievedItem {
  std::string segment_id;
  double semantic_score = 0.0;
  std::size_t keyword_hits = 0;

  friend bool operator==(const RetrievedItem&, const RetrievedItem&) = default;
};

struct RetrievedContext {
  std::vector<RetrievedItem> items;
  std::vector<std::string> query_keywords;

  bool empty() const { return items.empty(); }
};

// The built-in English stopword list used by extract_keywords.
std::span<const std::string_view> stopwords();

// Lowercase alphanumeric tokens of length >= 2, stopwords removed,
// first-occurrence order, no duplicates.
std::vector<std::string> extract_keywords(std::string_view question_text);

// Number of distinct keywords that occur as tokens of text.
std::size_t count_keyword_hits(std::string_view text, std::span<const std::string> keywords);

struct RetrievalQuery {
  std::string text;                   // embedded for the semantic score
  std::vector<std::string> keywords;  // lexical filter
};

RetrievalQuery make_query(std::string_view question_text);

// Hybrid search. A segment qualifies when keyword_hits >= min(min_keyword_matches,
// |keywords|) or semantic_score >= semantic_cutoff; qualifying segments are
// ranked by semantic score, then keyword hits, then reading order, and cut to top_k.
RetrievedContext find_text(const DocumentRecord& doc, const RetrievalQuery& query,
                           EmbeddingProvider& provider, const RetrievalConfig& config);

}  // namespace docground
