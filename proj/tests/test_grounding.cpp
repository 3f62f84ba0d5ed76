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
#include "docground/grounding.hpp"
#include "oracles.hpp"

using namespace docground;

namespace {

DocumentRecord doc_of(const std::vector<std::string>& texts) {
  DocumentRecord d;
  d.doc_id = "g";
  d.page_width = 2000;
  d.page_height = 2000;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    TextSegment s;
    s.id = "s" + std::to_string(i);
    s.text = texts[i];
    s.bbox = {10.0 + 100.0 * double(i % 4), 30.0 * double(i / 4), 90.0 + 100.0 * double(i % 4),
              30.0 * double(i / 4) + 20};
    s.order_index = i;
    d.segments.push_back(s);
  }
  return d;
}

class BrokenEmbedder : public EmbeddingProvider {
 public:
  std::size_t dimension() const override { return 8; }
  std::vector<Embedding> embed(std::span<const std::string>) override {
    throw RetryableError("embedding service unavailable");
  }
};

}  // namespace

TEST(GroundAnswerTest, ExactSingleSegment) {
  const auto doc = doc_of({"Total", "12.50"});
  auto emb = deterministic_embedder();
  const auto out = ground_answer("12.50", doc, {}, *emb, {});
  EXPECT_EQ(out.answer.method, GroundingMethod::Exact);
  EXPECT_DOUBLE_EQ(out.answer.confidence, 1.0);
  ASSERT_EQ(out.answer.regions.size(), 1u);
  EXPECT_EQ(out.answer.regions[0], doc.segments[1].bbox);
  EXPECT_EQ(*out.answer.merged_region, doc.segments[1].bbox);
}

TEST(GroundAnswerTest, FuzzyWithinTwoEdits) {
  const auto doc = doc_of({"Cashier", "Total: $5.OO"});
  auto emb = deterministic_embedder();
  const auto out = ground_answer("total: $5.00", doc, {}, *emb, {});
  EXPECT_EQ(out.answer.method, GroundingMethod::Fuzzy);
  EXPECT_EQ(oracle::edit_distance(U"total: $5.00", U"total: $5.oo"), 2u);
  EXPECT_NEAR(out.answer.confidence, 1.0 - 2.0 / 12.0, 1e-12);
  EXPECT_EQ(out.answer.regions, (std::vector<BBox>{doc.segments[1].bbox}));
}

TEST(GroundAnswerTest, ExactAcrossTwoSegments) {
  const auto doc = doc_of({"ACME", "Corporation", "Invoice"});
  auto emb = deterministic_embedder();
  const auto out = ground_answer("ACME Corporation", doc, {}, *emb, {});
  EXPECT_EQ(out.answer.method, GroundingMethod::Exact);
  ASSERT_EQ(out.answer.regions.size(), 2u);
  const std::vector<BBox> pair{doc.segments[0].bbox, doc.segments[1].bbox};
  EXPECT_EQ(*out.answer.merged_region, bbox_union(pair));
  ASSERT_TRUE(out.winner);
  EXPECT_EQ(out.winner->segment_ids, (std::vector<std::string>{"s0", "s1"}));
}

TEST(GroundAnswerTest, WholeTokenInsideSegment) {
  const auto doc = doc_of({"Date: 01/02/2024"});
  auto emb = deterministic_embedder();
  EXPECT_EQ(ground_answer("01/02/2024", doc, {}, *emb, {}).answer.method, GroundingMethod::Exact);
  // "2024" is part of a token, not a token.
  EXPECT_NE(ground_answer("2024", doc, {}, *emb, {}).answer.method, GroundingMethod::Exact);
}

TEST(GroundAnswerTest, ContextBreaksTies) {
  const auto doc = doc_of({"9.99", "Tax", "9.99"});
  auto emb = deterministic_embedder();
  EXPECT_EQ(ground_answer("9.99", doc, {}, *emb, {}).winner->segment_ids[0], "s0");
  EXPECT_EQ(ground_answer("9.99", doc, {"s2"}, *emb, {}).winner->segment_ids[0], "s2");
}

TEST(GroundAnswerTest, NoMatchIsUngrounded) {
  const auto doc = doc_of({"alpha", "beta"});
  auto emb = deterministic_embedder();
  const auto out = ground_answer("zzzzqqqq", doc, {}, *emb, {});
  EXPECT_EQ(out.answer.method, GroundingMethod::None);
  EXPECT_EQ(out.answer.text, "zzzzqqqq");
  EXPECT_TRUE(out.answer.regions.empty());
  EXPECT_FALSE(out.answer.merged_region);
}

TEST(GroundAnswerTest, ProviderFailureDegradesWithWarning) {
  const auto doc = doc_of({"alpha", "beta"});
  BrokenEmbedder emb;
  const auto out = ground_answer("gamma", doc, {}, emb, {});
  EXPECT_EQ(out.answer.method, GroundingMethod::None);
  EXPECT_EQ(out.warnings.size(), 1u);
  // Earlier tiers never touch the provider.
  EXPECT_EQ(ground_answer("beta", doc, {}, emb, {}).answer.method, GroundingMethod::Exact);
}

TEST(GroundAnswerTest, ScoreInvariantsPerTier) {
  const auto doc = doc_of({"Subtotal 10.00", "Tax 0.80", "Total 10.80", "Cash 20.00"});
  auto emb = deterministic_embedder();
  GroundingConfig cfg;
  cfg.semantic_threshold = 0.3;
  for (const char* a : {"Tax 0.80", "Total 10.8", "Totl 10.80", "subtotal of 10", "cash"}) {
    const auto out = ground_answer(a, doc, {}, *emb, cfg);
    if (!out.winner) continue;
    const auto& w = *out.winner;
    if (w.tier == MatchTier::Exact) {
      EXPECT_EQ(w.score, 1.0);
    } else if (w.tier == MatchTier::Fuzzy) {
      const auto x = to_code_points(normalize_for_match(a));
      const auto y = to_code_points(normalize_for_match(w.matched_text));
      EXPECT_NEAR(w.score, 1.0 - double(oracle::edit_distance_memo(x, y)) / double(std::max(x.size(), y.size())),
                  1e-12);
    } else {
      EXPECT_LT(w.score, 1.0);
      EXPECT_GE(w.score, cfg.semantic_threshold);
    }
  }
}

TEST(GroundAnswerTest, MatchesExhaustiveOracle) {
  const std::vector<std::string> vocab{"Total", "12.50", "12.5O", "ACME", "Corp", "Tax", "0.80",
                                       "Date:", "01/02/2024", "total 12.50", "Cash"};
  const std::vector<std::string> answers{"12.50", "ACME Corp", "total 12.50", "0.8", "Tax 0.80",
                                         "date: 01/02/2024", "acme corp tax", "Cashier", "zz"};
  std::mt19937_64 rng(2024);
  auto emb = deterministic_embedder(64);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> texts;
    for (std::size_t k = 1 + rng() % 8; k > 0; --k) texts.push_back(vocab[rng() % vocab.size()]);
    const auto doc = doc_of(texts);
    std::unordered_set<std::string> ctx;
    for (const auto& s : doc.segments) {
      if (rng() % 3 == 0) ctx.insert(s.id);
    }
    GroundingConfig cfg;
    cfg.semantic_threshold = 0.6;
    const auto& answer = answers[rng() % answers.size()];
    const auto got = ground_answer(answer, doc, ctx, *emb, cfg);
    const auto want = oracle::grounding_exhaustive(answer, doc, ctx, *emb, cfg);
    if (want.tier.empty()) {
      EXPECT_FALSE(got.winner);
      continue;
    }
    ASSERT_TRUE(got.winner) << answer;
    EXPECT_EQ(to_string(got.winner->tier), want.tier);
    EXPECT_EQ(got.winner->start, want.start);
    EXPECT_EQ(got.winner->segment_ids.size(), want.length);
    EXPECT_NEAR(got.answer.confidence, want.score, 1e-12);
    std::vector<BBox> boxes;
    for (std::size_t i = want.start; i < want.start + want.length; ++i) boxes.push_back(doc.segments[i].bbox);
    EXPECT_EQ(got.answer.regions, boxes);
  }
}

TEST(GroundOperandsTest, RegionsFollowOperands) {
  const auto doc = doc_of({"a", "b", "c", "d", "e", "f", "g", "h"});
  const ComputeRequest req(ComputeOp::Sum, {{1, "s3", "1"}, {2, "s7", "2"}});
  const auto out = ground_operands(req, doc, "3");
  EXPECT_EQ(out.method, GroundingMethod::Operands);
  EXPECT_EQ(out.regions, (std::vector<BBox>{doc.segments[3].bbox, doc.segments[7].bbox}));
  EXPECT_DOUBLE_EQ(out.confidence, 1.0);

  const ComputeRequest one(ComputeOp::Sum, {{1, "s2", "1"}});
  EXPECT_EQ(*ground_operands(one, doc, "1").merged_region, doc.segments[2].bbox);

  const ComputeRequest bad(ComputeOp::Sum, {{1, "s99", "1"}});
  EXPECT_THROW(ground_operands(bad, doc, "1"), ConsistencyError);
}
