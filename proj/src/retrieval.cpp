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

#include "docground/retrieval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <numeric>
#include <tuple>
#include <unordered_set>

#include "docground/error.hpp"
#include "docground/text.hpp"

namespace docground {

namespace {

constexpr std::array<std::string_view, 72> kStopwords = {
    "a", "about", "all", "am", "an", "and", "any", "are", "as", "at",
    "be", "been", "being", "but", "by", "can", "could", "did", "do", "does",
    "for", "from", "had", "has", "have", "he", "her", "his", "how", "if",
    "in", "into", "is", "it", "its", "many", "me", "much", "my", "no",
    "not", "of", "on", "or", "our", "she", "so", "that", "the", "their",
    "there", "these", "they", "this", "those", "to", "was", "we", "were", "what",
    "when", "where", "which", "who", "whom", "whose", "why", "will", "with", "would",
    "you", "your",};

bool is_stopword(std::string_view token) {
  return std::find(kStopwords.begin(), kStopwords.end(), token) != kStopwords.end();
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

std::uint64_t hash_code_points(std::u32string_view cps, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ull ^ mix64(seed);
  for (char32_t c : cps) {
    for (int shift = 0; shift < 32; shift += 8) {
      h ^= (static_cast<std::uint64_t>(c) >> shift) & 0xffu;
      h *= 0x100000001b3ull;
    }
  }
  return mix64(h);
}

}  // namespace

std::span<const std::string_view> stopwords() { return kStopwords; }

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension_ < 8) throw ConfigError("embedding dimension must be >= 8");
}

Embedding HashingEmbedder::embed_one(std::string_view text) const {
  std::u32string padded = U"\u0002";
  padded += to_code_points(normalize_for_match(text));
  padded += U'\u0003';
  Embedding v(dimension_, 0.0);
  if (padded.size() < 3) {
    v[hash_code_points(padded, seed_) % dimension_] = 1.0;
  } else {
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      v[hash_code_points(std::u32string_view(padded).substr(i, 3), seed_) % dimension_] += 1.0;
    }
  }
  const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  for (double& x : v) x /= norm;
  return v;
}

std::vector<Embedding> HashingEmbedder::embed(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

std::shared_ptr<EmbeddingProvider> deterministic_embedder(std::size_t dimension) {
  return std::make_shared<HashingEmbedder>(dimension);
}

CachingEmbeddingProvider::CachingEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner)
    : inner_(std::move(inner)) {
  if (!inner_) throw ConfigError("CachingEmbeddingProvider needs a provider");
}

std::vector<Embedding> CachingEmbeddingProvider::embed(std::span<const std::string> texts) {
  std::vector<Embedding> out(texts.size());
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_at;
  {
    std::shared_lock lock(mutex_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (auto it = cache_.find(texts[i]); it != cache_.end()) {
        out[i] = it->second;
      } else {
        missing.push_back(texts[i]);
        missing_at.push_back(i);
      }
    }
  }
  if (missing.empty()) return out;

  std::vector<Embedding> fresh = inner_->embed(missing);
  if (fresh.size() != missing.size()) {
    throw ConsistencyError("embedding provider returned wrong number of vectors");
  }
  std::unique_lock lock(mutex_);
  for (std::size_t k = 0; k < missing.size(); ++k) {
    // First writer wins so concurrent episodes observe one vector per text.
    auto [it, inserted] = cache_.emplace(missing[k], std::move(fresh[k]));
    out[missing_at[k]] = it->second;
  }
  return out;
}

std::size_t CachingEmbeddingProvider::cached() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::shared_ptr<ServiceClient> client,
                                                 std::size_t dimension)
    : client_(std::move(client)), dimension_(dimension) {
  if (dimension_ == 0) throw ConfigError("embedding dimension must be positive");
}

std::vector<Embedding> RemoteEmbeddingProvider::embed(std::span<const std::string> texts) {
  const Json response =
      client_->call(make_envelope("embed", Json{{"texts", std::vector<std::string>(texts.begin(), texts.end())}}));
  const Json& payload = envelope_payload(response, "embed");
  if (!payload.contains("vectors") || !payload["vectors"].is_array() ||
      payload["vectors"].size() != texts.size()) {
    throw ParseError("embedding response must carry one vector per text: " +
                     payload.dump().substr(0, 200));
  }
  std::vector<Embedding> out;
  for (const Json& v : payload["vectors"]) {
    if (!v.is_array() || v.size() != dimension_) {
      throw ParseError("embedding vector has wrong dimension (expected " +
                       std::to_string(dimension_) + ")");
    }
    out.push_back(v.get<Embedding>());
  }
  return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ConsistencyError("cosine_similarity: dimension mismatch");
  const double dot = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
  const double nu = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
  const double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  if (nu == 0.0 || nv == 0.0) throw ConsistencyError("cosine_similarity: zero vector");
  return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

void RetrievalConfig::validate() const {
  if (top_k < 1) throw ConfigError("retrieval top_k must be >= 1");
  if (!(semantic_cutoff >= -1.0 && semantic_cutoff <= 1.0)) {
    throw ConfigError("retrieval semantic_cutoff must lie in [-1, 1]");
  }
}

std::vector<std::string> extract_keywords(std::string_view question_text) {
  std::vector<std::string> out;
  for (auto& token : alnum_tokens(question_text)) {
    if (code_point_length(token) < 2 || is_stopword(token)) continue;
    if (std::find(out.begin(), out.end(), token) == out.end()) out.push_back(std::move(token));
  }
  return out;
}

std::size_t count_keyword_hits(std::string_view text, std::span<const std::string> keywords) {
  const auto tokens = alnum_tokens(text);
  const std::unordered_set<std::string> present(tokens.begin(), tokens.end());
  std::unordered_set<std::string_view> seen;
  std::size_t hits = 0;
  for (const auto& k : keywords) {
    if (present.count(k) != 0 && seen.insert(k).second) ++hits;
  }
  return hits;
}

RetrievalQuery make_query(std::string_view question_text) {
  return {std::string(question_text), extract_keywords(question_text)};
}

RetrievedContext find_text(const DocumentRecord& doc, const RetrievalQuery& query,
                           EmbeddingProvider& provider, const RetrievalConfig& config) {
  config.validate();
  RetrievedContext ctx;
  ctx.query_keywords = query.keywords;
  if (doc.segments.empty()) return ctx;

  std::vector<std::string> texts;
  texts.reserve(doc.segments.size() + 1);
  texts.push_back(query.text);
  for (const auto& s : doc.segments) texts.push_back(s.text);
  const std::vector<Embedding> vectors = provider.embed(texts);
  if (vectors.size() != texts.size()) {
    throw ConsistencyError("embedding provider returned wrong number of vectors");
  }

  const std::size_t effective_min = std::min(config.min_keyword_matches, query.keywords.size());
  struct Scored {
    RetrievedItem item;
    std::size_t order;
  };
  std::vector<Scored> candidates;
  for (std::size_t i = 0; i < doc.segments.size(); ++i) {
    const TextSegment& s = doc.segments[i];
    const double score = cosine_similarity(vectors[0], vectors[i + 1]);
    const std::size_t hits = count_keyword_hits(s.text, query.keywords);
    if (hits >= effective_min || score >= config.semantic_cutoff) {
      candidates.push_back({{s.id, score, hits}, s.order_index});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Scored& a, const Scored& b) {
    return std::make_tuple(-a.item.semantic_score, -static_cast<long long>(a.item.keyword_hits), a.order) <
           std::make_tuple(-b.item.semantic_score, -static_cast<long long>(b.item.keyword_hits), b.order);
  });
  if (candidates.size() > config.top_k) candidates.resize(config.top_k);
  for (auto& c : candidates) ctx.items.push_back(std::move(c.item));
  return ctx;
}

}  // namespace docground
