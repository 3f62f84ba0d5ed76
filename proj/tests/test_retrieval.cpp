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

#include <gtest/gtest.h>

#include <random>

#include "docground/error.hpp"
#include "docground/retrieval.hpp"
#include "oracles.hpp"

using namespace docground;

namespace {

DocumentRecord doc_of(const std::vector<std::string>& texts) {
  DocumentRecord d;
  d.doc_id = "d";
  d.page_width = 1000;
  d.page_height = 2000;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    TextSegment s;
    s.id = "s" + std::to_string(i);
    s.text = texts[i];
    s.bbox = {10, 30.0 * double(i), 300, 30.0 * double(i) + 20};
    s.order_index = i;
    d.segments.push_back(s);
  }
  return d;
}

class CountingEmbedder : public EmbeddingProvider {
 public:
  std::size_t dimension() const override { return 16; }
  std::vector<Embedding> embed(std::span<const std::string> texts) override {
    ++calls;
    return HashingEmbedder(16).embed(texts);
  }
  int calls = 0;
};

class FailingEmbedder : public EmbeddingProvider {
 public:
  std::size_t dimension() const override { return 16; }
  std::vector<Embedding> embed(std::span<const std::string>) override {
    throw RetryableError("embed service down");
  }
};

}  // namespace

TEST(KeywordsTest, Examples) {
  EXPECT_EQ(extract_keywords("What is the total amount?"), (std::vector<std::string>{"total", "amount"}));
  EXPECT_TRUE(extract_keywords("When?").empty());
  EXPECT_EQ(extract_keywords("Sum of TAX and TIP"), (std::vector<std::string>{"sum", "tax", "tip"}));
}

TEST(KeywordsTest, NoDuplicatesAndNoStopwords) {
  const auto kw = extract_keywords("total Total TOTAL of the a date");
  EXPECT_EQ(kw, (std::vector<std::string>{"total", "date"}));
  for (const auto& w : kw) {
    for (auto s : stopwords()) EXPECT_NE(w, s);
  }
}

TEST(KeywordsTest, HitsCountDistinctKeywords) {
  const std::vector<std::string> kw{"total", "amount"};
  EXPECT_EQ(count_keyword_hits("TOTAL AMOUNT 12.50", kw), 2u);
  EXPECT_EQ(count_keyword_hits("total total", kw), 1u);
  EXPECT_EQ(count_keyword_hits("subtotal", kw), 0u);
}

TEST(CosineTest, Examples) {
  const std::vector<double> u{1, 2, 3}, v{3, 2, 1};
  EXPECT_NEAR(cosine_similarity(u, v), 10.0 / 14.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(u, u), 1.0, 1e-15);
  const std::vector<double> e1{1, 0}, e2{0, 1};
  EXPECT_DOUBLE_EQ(cosine_similarity(e1, e2), 0.0);
  const std::vector<double> zero{0, 0, 0};
  EXPECT_THROW(cosine_similarity(u, zero), ConsistencyError);
  EXPECT_THROW(cosine_similarity(u, e1), ConsistencyError);
}

TEST(EmbedderTest, DeterministicAndNormalized) {
  auto emb = deterministic_embedder(384);
  EXPECT_EQ(emb->dimension(), 384u);
  const std::vector<std::string> texts{"total", "total", "subtotal", "cashier"};
  const auto v = emb->embed(texts);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[0], v[1]);
  EXPECT_NEAR(oracle::dot(v[0], v[0]), 1.0, 1e-12);
  EXPECT_NEAR(cosine_similarity(v[0], v[1]), 1.0, 1e-12);
  // Shared trigrams raise similarity.
  EXPECT_GT(cosine_similarity(v[0], v[2]), cosine_similarity(v[0], v[3]));
  EXPECT_THROW(deterministic_embedder(4), ConfigError);
}

TEST(EmbedderTest, CacheServesRepeats) {
  auto inner = std::make_shared<CountingEmbedder>();
  CachingEmbeddingProvider cache(inner);
  const std::vector<std::string> a{"x", "y"};
  const auto first = cache.embed(a);
  const auto second = cache.embed(a);
  EXPECT_EQ(first, second);
  EXPECT_EQ(inner->calls, 1);
  EXPECT_EQ(cache.cached(), 2u);
}

TEST(FindTextTest, UniqueKeywordMatchRanksFirst) {
  const auto doc = doc_of({"Welcome", "TOTAL AMOUNT 12.50", "Thank you", "Cashier Bob"});
  auto emb = deterministic_embedder();
  const auto ctx = find_text(doc, make_query("total amount"), *emb, {});
  ASSERT_FALSE(ctx.empty());
  EXPECT_EQ(ctx.items[0].segment_id, "s1");
  EXPECT_EQ(ctx.items[0].keyword_hits, 2u);
}

TEST(FindTextTest, EmptyDocument) {
  DocumentRecord d;
  d.doc_id = "e";
  auto emb = deterministic_embedder();
  EXPECT_TRUE(find_text(d, make_query("total"), *emb, {}).empty());
}

TEST(FindTextTest, ProviderFailurePropagatesAsRetryable) {
  FailingEmbedder emb;
  EXPECT_THROW(find_text(doc_of({"a"}), make_query("total"), emb, {}), RetryableError);
}

TEST(FindTextTest, MatchesExhaustiveScoringOracle) {
  const std::vector<std::string> vocab{"total", "amount", "tax", "date", "cashier", "item",
                                       "price", "12.50", "store", "receipt", "due", "card"};
  std::mt19937_64 rng(99);
  auto emb = deterministic_embedder(64);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> texts;
    for (int i = 0; i < 10; ++i) {
      std::string t;
      for (std::size_t k = 1 + rng() % 3; k > 0; --k) t += (t.empty() ? "" : " ") + vocab[rng() % vocab.size()];
      texts.push_back(t);
    }
    const auto doc = doc_of(texts);
    const std::string question = "what is the " + vocab[rng() % 6] + " " + vocab[rng() % 6];
    RetrievalConfig cfg;
    cfg.top_k = 1 + rng() % 6;
    const auto query = make_query(question);
    const auto got = find_text(doc, query, *emb, cfg);

    const auto qv = emb->embed(std::vector<std::string>{query.text})[0];
    std::vector<std::tuple<double, long, std::size_t>> scored;
    const std::size_t need = std::min<std::size_t>(2, query.keywords.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const auto sv = emb->embed(std::vector<std::string>{texts[i]})[0];
      const double s = oracle::cosine(qv, sv);
      std::size_t hits = 0;
      for (const auto& k : query.keywords) hits += oracle::token_has_keyword(texts[i], {k});
      if (hits >= need || s >= 0.5) scored.emplace_back(-s, -long(hits), i);
    }
    std::sort(scored.begin(), scored.end());
    if (scored.size() > cfg.top_k) scored.resize(cfg.top_k);
    ASSERT_EQ(got.items.size(), scored.size());
    for (std::size_t r = 0; r < scored.size(); ++r) {
      EXPECT_EQ(got.items[r].segment_id, "s" + std::to_string(std::get<2>(scored[r])));
      EXPECT_NEAR(got.items[r].semantic_score, -std::get<0>(scored[r]), 1e-12);
    }
    for (std::size_t r = 1; r < got.items.size(); ++r) {
      EXPECT_GE(got.items[r - 1].semantic_score, got.items[r].semantic_score);
    }
  }
}
