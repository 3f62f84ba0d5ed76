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
#include "docground/ocr.hpp"

using namespace docground;

namespace {

TextSegment seg(std::string id, std::string text, BBox box) {
  TextSegment s;
  s.id = std::move(id);
  s.text = std::move(text);
  s.bbox = box;
  return s;
}

DocumentRecord page(std::vector<TextSegment> segments) {
  DocumentRecord d;
  d.doc_id = "p";
  d.page_width = 1000;
  d.page_height = 1000;
  d.segments = std::move(segments);
  return d;
}

std::vector<std::string> ids(const std::vector<TextSegment>& segments) {
  std::vector<std::string> out;
  for (const auto& s : segments) out.push_back(s.id);
  return out;
}

}  // namespace

TEST(ParseOcrJsonTest, AssignsReadingOrder) {
  const auto doc = parse_ocr_json(R"({"doc_id":"r1","page_width":200,"page_height":200,
    "segments":[{"id":"b","text":"12.50","bbox":[70,100,110,115],"confidence":0.9},
                {"id":"a","text":"Total","bbox":[10,100,60,115],"confidence":0.95}]})");
  ASSERT_EQ(doc.segments.size(), 2u);
  EXPECT_EQ(doc.segments[0].text, "Total");
  EXPECT_EQ(doc.segments[0].order_index, 0u);
  EXPECT_EQ(doc.segments[1].text, "12.50");
  EXPECT_EQ(doc.segments[1].order_index, 1u);
}

TEST(ParseOcrJsonTest, EmptySegmentList) {
  const auto doc = parse_ocr_json(R"({"doc_id":"e","page_width":10,"page_height":10,"segments":[]})");
  EXPECT_TRUE(doc.segments.empty());
}

TEST(ParseOcrJsonTest, RejectsBadSegments) {
  EXPECT_THROW(parse_ocr_json(R"({"doc_id":"e","page_width":10,"page_height":10,
    "segments":[{"id":"a","text":"","bbox":[0,0,1,1],"confidence":1}]})"),
               ParseError);
  EXPECT_THROW(parse_ocr_json(R"({"doc_id":"e","page_width":10,"page_height":10,
    "segments":[{"id":"a","text":"x","bbox":[5,0,1,1],"confidence":1}]})"),
               ParseError);
  EXPECT_THROW(parse_ocr_json("not json"), ParseError);
}

TEST(ParseOcrJsonTest, ErrorNamesRecordIndex) {
  try {
    parse_ocr_json(R"({"doc_id":"e","page_width":10,"page_height":10,
      "segments":[{"id":"a","text":"x","bbox":[0,0,1,1],"confidence":1},
                  {"id":"b","text":"y","bbox":[0,0,1],"confidence":1}]})");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos) << e.what();
  }
}

TEST(ParseOcrJsonTest, RoundTrip) {
  const auto doc = page({seg("a", "Name", {10, 10, 60, 30}), seg("b", "ACME", {80, 10, 140, 30}),
                         seg("c", "Total 5", {10, 60, 90, 80})});
  const auto ordered = DocumentRecord{doc.doc_id, std::nullopt, doc.page_width, doc.page_height,
                                      assign_reading_order(doc.segments)};
  const auto back = parse_ocr_json(serialize_ocr_json(ordered));
  EXPECT_EQ(back, ordered);
}

TEST(ReadingOrderTest, SideBySideAndStacked) {
  auto side = assign_reading_order({seg("r", "R", {50, 0, 90, 20}), seg("l", "L", {0, 0, 40, 20})});
  EXPECT_EQ(ids(side), (std::vector<std::string>{"l", "r"}));
  auto stacked = assign_reading_order({seg("lo", "B", {0, 50, 40, 70}), seg("hi", "A", {0, 0, 40, 20})});
  EXPECT_EQ(ids(stacked), (std::vector<std::string>{"hi", "lo"}));
  EXPECT_EQ(stacked[0].order_index, 0u);
  EXPECT_EQ(stacked[1].order_index, 1u);
}

// Oracle: two well separated bands, sort by (band, x_min).
TEST(ReadingOrderTest, MatchesLineBandOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TextSegment> segs;
    std::vector<std::tuple<int, double, std::string>> expected;
    std::vector<int> slots{0, 1, 2, 3, 4, 5, 6, 7};
    std::shuffle(slots.begin(), slots.end(), rng);
    for (int k = 0; k < 5; ++k) {
      const int band = static_cast<int>(rng() % 2);
      const double x = slots[static_cast<std::size_t>(k)] * 60.0;
      const double y = band * 100.0 + static_cast<double>(rng() % 5);
      const std::string id = "s" + std::to_string(k);
      segs.push_back(seg(id, "t", {x, y, x + 50, y + 20}));
      expected.emplace_back(band, x, id);
    }
    std::sort(expected.begin(), expected.end());
    std::vector<std::string> want;
    for (const auto& e : expected) want.push_back(std::get<2>(e));
    EXPECT_EQ(ids(assign_reading_order(segs)), want);
  }
}

TEST(GroupSegmentsTest, OneLine) {
  const auto doc = page({seg("a", "a", {0, 0, 10, 20}), seg("b", "b", {20, 2, 30, 22}),
                         seg("c", "c", {40, 1, 50, 21})});
  const auto lines = group_segments(doc, GroupKind::Line);
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0].member_ids.size(), 3u);
  EXPECT_EQ(lines[0].bbox, (BBox{0, 0, 50, 22}));
}

TEST(GroupSegmentsTest, FarApartLinesMakeTwoBlocks) {
  const auto doc = page({seg("a", "a", {0, 0, 10, 20}), seg("b", "b", {0, 120, 10, 140})});
  EXPECT_EQ(group_segments(doc, GroupKind::Block).size(), 2u);
}

TEST(GroupSegmentsTest, UniformReceiptColumnIsOneBlock) {
  std::vector<TextSegment> segs;
  for (int i = 0; i < 6; ++i) {
    segs.push_back(seg("s" + std::to_string(i), "x", {0, i * 30.0, 100, i * 30.0 + 20}));
  }
  // Gaps of 10 against a median height of 20.
  const auto blocks = group_segments(page(segs), GroupKind::Block);
  ASSERT_EQ(blocks.size(), 1u);
  EXPECT_EQ(blocks[0].member_ids.size(), 6u);
  EXPECT_EQ(blocks[0].bbox, (BBox{0, 0, 100, 170}));
}

TEST(RunOcrTest, MockPassthroughAssignsOrder) {
  MockOcrClient client(page({seg("c", "C", {0, 60, 10, 80}), seg("b", "B", {20, 0, 30, 20}),
                             seg("a", "A", {0, 0, 10, 20})}));
  const auto doc = run_ocr("img.png", client);
  EXPECT_EQ(ids(doc.segments), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(client.calls(), 1u);
}

TEST(RunOcrTest, UnreachableEndpointRetriesThenFails) {
  int attempts = 0;
  auto transport = std::make_shared<FunctionTransport>([&](const Json&) -> Json {
    ++attempts;
    throw RetryableError("connection refused");
  });
  RetryPolicy policy;
  policy.retries = 2;
  policy.seed = 1;
  RemoteOcrClient client(std::make_shared<RetryingClient>(transport, policy, [](Millis) {}));
  EXPECT_THROW(run_ocr("img.png", client), RetryableError);
  EXPECT_EQ(attempts, 3);
}

TEST(RunOcrTest, InvertedBoxFromServiceIsParseError) {
  auto transport = std::make_shared<FunctionTransport>([](const Json&) {
    return make_envelope("ocr", Json{{"doc_id", "x"},
                                     {"page_width", 100},
                                     {"page_height", 100},
                                     {"segments", Json::array({Json{{"id", "a"},
                                                                    {"text", "t"},
                                                                    {"bbox", {50, 0, 10, 10}},
                                                                    {"confidence", 1.0}}})}});
  });
  RemoteOcrClient client(std::make_shared<RetryingClient>(transport, RetryPolicy{}, [](Millis) {}));
  EXPECT_THROW(run_ocr("img.png", client), ParseError);
}
