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

#include <sstream>

#include "docground/dataset.hpp"
#include "docground/error.hpp"
#include "docground/planner.hpp"

using namespace docground;

namespace {

std::vector<std::string> tools(const std::vector<TraceStep>& trace) {
  std::vector<std::string> out;
  for (const auto& s : trace) out.emplace_back(to_string(s.action.tool));
  return out;
}

Services hermetic() {
  Services s;
  s.embedder = deterministic_embedder();
  s.qa = mock_extractive_qa();
  return s;
}

// One receipt with `items` line items.
struct Receipt {
  DocumentRecord doc;
  std::vector<QaRecord> records;
};

Receipt receipt(std::size_t items, std::uint64_t seed = 7) {
  SyntheticSpec spec;
  spec.receipt_fraction = 1.0;
  spec.min_items = spec.max_items = items;
  const auto b = generate_synthetic(seed, 1, spec);
  return {b.docs.begin()->second, b.records};
}

const QaRecord& record_for(const Receipt& r, std::string_view question) {
  for (const auto& rec : r.records) {
    if (rec.question.text == question) return rec;
  }
  throw std::runtime_error("no such question");
}

class ThrowingQa : public QaBackend {
 public:
  explicit ThrowingQa(bool retryable) : retryable_(retryable) {}
  QaReply answer(const QaRequest&) override {
    if (retryable_) throw RetryableError("qa timeout");
    throw ServiceError("qa rejected request");
  }
  std::string_view name() const override { return "throwing"; }

 private:
  bool retryable_;
};

}  // namespace

TEST(DetectComputationalTest, Examples) {
  EXPECT_EQ(detect_computational("What is the sum of all item prices?"), ComputeOp::Sum);
  EXPECT_EQ(detect_computational("How many items were purchased?"), ComputeOp::Count);
  EXPECT_EQ(detect_computational("What is the average price?"), ComputeOp::Mean);
  EXPECT_EQ(detect_computational("What is the lowest price?"), ComputeOp::Min);
  EXPECT_EQ(detect_computational("What is the highest price?"), ComputeOp::Max);
  EXPECT_EQ(detect_computational("Who signed the form?"), std::nullopt);
  EXPECT_EQ(detect_computational("What is the total?"), std::nullopt);
}

TEST(HeuristicPolicyTest, Progression) {
  PlannerConfig cfg;
  PlannerState st;
  st.question = "What is the total?";
  st.question_keywords = {"total"};
  EXPECT_EQ(heuristic_policy(st, cfg).tool, Tool::RunOcr);

  st.phase = Phase::Grounded;
  st.answer_text = "12.50";
  st.last_grounding_confidence = 0.3;
  const Action retry = heuristic_policy(st, cfg);
  ASSERT_EQ(retry.tool, Tool::FindText);
  const auto kw = retry.args["keywords"].get<std::vector<std::string>>();
  EXPECT_EQ(kw.front(), "total");
  EXPECT_NE(std::find(kw.begin(), kw.end(), "50"), kw.end());

  st.refinements = 1;
  EXPECT_EQ(heuristic_policy(st, cfg).tool, Tool::Finish);

  st.refinements = 0;
  st.last_grounding_confidence = 1.0;
  EXPECT_EQ(heuristic_policy(st, cfg).tool, Tool::Finish);

  st.phase = Phase::Unanswerable;
  EXPECT_EQ(heuristic_policy(st, cfg).tool, Tool::Finish);
}

TEST(PlannerConfigTest, Validation) {
  PlannerConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_DOUBLE_EQ(cfg.temperature, 0.7);
  EXPECT_EQ(cfg.max_rationale_tokens, 256u);
  cfg.max_steps = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_EQ(policy_from_string("llm"), PolicyKind::Llm);
  EXPECT_THROW(policy_from_string("random"), ConfigError);
}

TEST(PlannerReplyTest, ParseAndFormat) {
  const Action a = parse_planner_reply("THINK look at the page\nTOOL FIND_TEXT {\"keywords\": [\"total\"]}\n", 256);
  EXPECT_EQ(a.tool, Tool::FindText);
  EXPECT_EQ(a.args["keywords"][0], "total");
  EXPECT_EQ(a.rationale, "look at the page");
  const Action b = parse_planner_reply(format_planner_reply(a), 256);
  EXPECT_EQ(b.tool, a.tool);
  EXPECT_EQ(b.args, a.args);
  EXPECT_EQ(b.rationale, a.rationale);
  EXPECT_EQ(parse_planner_reply("TOOL FINISH", 256).args, Json::object());
}

TEST(PlannerReplyTest, Rejects) {
  EXPECT_THROW(parse_planner_reply("TOOL DANCE {}", 256), ParseError);
  EXPECT_THROW(parse_planner_reply("TOOL RUN_OCR {}\nTOOL FINISH {}", 256), ParseError);
  EXPECT_THROW(parse_planner_reply("THINK only thoughts", 256), ParseError);
  EXPECT_THROW(parse_planner_reply("TOOL ASK_QA [1,2]", 256), ParseError);
  EXPECT_THROW(parse_planner_reply("TOOL ASK_QA {", 256), ParseError);
  EXPECT_THROW(parse_planner_reply("Sure! TOOL RUN_OCR {}", 256), ParseError);
}

TEST(PlannerReplyTest, RationaleTruncated) {
  const Action a = parse_planner_reply("THINK a b c d e f\nTOOL FINISH {}", 3);
  EXPECT_EQ(a.rationale, "a b c");
}

TEST(PlannerReplyTest, BuiltInExamplesParse) {
  std::istringstream in{std::string(planner_examples())};
  std::string line;
  int tool_lines = 0;
  while (std::getline(in, line)) {
    if (line.rfind("TOOL ", 0) != 0) continue;
    EXPECT_NO_THROW(parse_planner_reply(line, 256)) << line;
    ++tool_lines;
  }
  EXPECT_GE(tool_lines, 20);
}

TEST(PlannerPromptTest, ContainsVersionQuestionAndTruncatedHistory) {
  PlannerState st;
  st.question = "What is the total?";
  TraceStep step;
  step.action = {Tool::RunOcr, Json::object(), "read"};
  step.observation = Json{{"blob", std::string(2000, 'x')}};
  st.history.push_back(step);
  const std::string p = build_planner_prompt(st, {});
  EXPECT_NE(p.find(kPlannerPromptVersion), std::string::npos);
  EXPECT_NE(p.find("What is the total?"), std::string::npos);
  EXPECT_EQ(p.find(std::string(600, 'x')), std::string::npos);
  EXPECT_NE(p.find("..."), std::string::npos);
}

TEST(RunPipelineTest, HeuristicSequence) {
  const auto r = receipt(3);
  const auto& rec = record_for(r, "What is the total?");
  const auto out = run_pipeline(DocumentInput::parsed(r.doc), rec.question.text, hermetic(), {});
  EXPECT_EQ(tools(out.trace),
            (std::vector<std::string>{"RUN_OCR", "FIND_TEXT", "ASK_QA", "GROUND_ANSWER", "FINISH"}));
  EXPECT_EQ(out.answer.text, rec.truth.answers[0]);
  EXPECT_EQ(out.answer.method, GroundingMethod::Exact);
  EXPECT_EQ(*out.answer.merged_region, rec.truth.gt_boxes[0]);
  for (std::size_t i = 0; i < out.trace.size(); ++i) EXPECT_EQ(out.trace[i].step_index, i);
  EXPECT_FALSE(out.planner_fallback);
}

TEST(RunPipelineTest, NoRetrievalUsesAllSegments) {
  const auto r = receipt(3);
  PipelineConfig cfg;
  cfg.planner.ablations.no_retrieval = true;
  const auto out = run_pipeline(DocumentInput::parsed(r.doc), "What is the total?", hermetic(), cfg);
  const auto t = tools(out.trace);
  EXPECT_EQ(std::count(t.begin(), t.end(), "FIND_TEXT"), 0);
  const auto ask = std::find(t.begin(), t.end(), "ASK_QA");
  ASSERT_NE(ask, t.end());
  std::vector<std::string> all;
  for (const auto& s : r.doc.segments) all.push_back(s.id);
  EXPECT_EQ(out.trace[std::size_t(ask - t.begin())].action.args["context_ids"].get<std::vector<std::string>>(), all);
}

TEST(RunPipelineTest, UnsupportedQuestionFinishesQuickly) {
  const auto r = receipt(3);
  PipelineConfig cfg;
  cfg.planner.ablations.lookup_only_qa = true;
  const auto out = run_pipeline(DocumentInput::parsed(r.doc), "Who signed the form?", hermetic(), cfg);
  EXPECT_TRUE(out.answer.is_no_answer());
  EXPECT_LE(out.trace.size(), 4u);
  EXPECT_EQ(out.trace.back().action.tool, Tool::Finish);
}

TEST(RunPipelineTest, ComputePathGroundsOperands) {
  const auto r = receipt(5);
  const auto& rec = record_for(r, "What is the sum of all item prices?");
  const auto out = run_pipeline(DocumentInput::parsed(r.doc), rec.question.text, hermetic(), {});
  const auto t = tools(out.trace);
  EXPECT_NE(std::find(t.begin(), t.end(), "COMPUTE"), t.end());
  EXPECT_EQ(std::find(t.begin(), t.end(), "ASK_QA"), t.end());
  EXPECT_EQ(out.answer.text, rec.truth.answers[0]);
  EXPECT_EQ(out.answer.method, GroundingMethod::Operands);
  EXPECT_EQ(out.answer.regions.size(), 5u);
}

TEST(RunPipelineTest, ScriptedPlannerMatchesHeuristic) {
  const auto r = receipt(4);
  for (const char* q : {"What is the total?", "What is the sum of all item prices?", "Who signed the form?"}) {
    const auto heur = run_pipeline(DocumentInput::parsed(r.doc), q, hermetic(), {});
    std::vector<std::string> replies;
    for (const auto& s : heur.trace) replies.push_back(format_planner_reply(s.action));
    auto planner = std::make_shared<ScriptedPlannerClient>(replies);
    Services svc = hermetic();
    svc.planner = planner;
    PipelineConfig cfg;
    cfg.planner.policy = PolicyKind::Llm;
    const auto llm = run_pipeline(DocumentInput::parsed(r.doc), q, svc, cfg);
    ASSERT_EQ(llm.trace.size(), heur.trace.size()) << q;
    for (std::size_t i = 0; i < llm.trace.size(); ++i) {
      EXPECT_EQ(llm.trace[i].action.tool, heur.trace[i].action.tool);
      EXPECT_EQ(llm.trace[i].action.args, heur.trace[i].action.args);
      EXPECT_EQ(llm.trace[i].action.rationale, heur.trace[i].action.rationale);
      EXPECT_EQ(llm.trace[i].observation, heur.trace[i].observation);
    }
    EXPECT_EQ(llm.answer, heur.answer);
    EXPECT_FALSE(llm.planner_fallback);
    EXPECT_EQ(planner->prompts().size(), replies.size());
  }
}

TEST(RunPipelineTest, UnknownToolTwiceFallsBack) {
  const auto r = receipt(3);
  Services svc = hermetic();
  svc.planner = std::make_shared<ScriptedPlannerClient>(std::vector<std::string>{"TOOL DANCE {}", "TOOL JUMP {}"});
  PipelineConfig cfg;
  cfg.planner.policy = PolicyKind::Llm;
  const auto out = run_pipeline(DocumentInput::parsed(r.doc), "What is the total?", svc, cfg);
  EXPECT_TRUE(out.planner_fallback);
  EXPECT_FALSE(out.warnings.empty());
  EXPECT_NE(out.trace[0].action.rationale.find("[fallback]"), std::string::npos);
  EXPECT_EQ(out.answer.text, record_for(r, "What is the total?").truth.answers[0]);
}

TEST(RunPipelineTest, LlmComputeOnChosenOperands) {
  const auto r = receipt(5);
  std::vector<std::string> ids;
  for (const auto& v : find_numeric_operands(r.doc)) ids.push_back(v.source_segment_id);
  ASSERT_EQ(ids.size(), 5u);
  const std::vector<std::string> picked{ids[0], ids[2]};
  const double want = *parse_number(r.doc.find_segment(ids[0])->text) + *parse_number(r.doc.find_segment(ids[2])->text);
  Services svc = hermetic();
  svc.planner = std::make_shared<ScriptedPlannerClient>(std::vector<std::string>{
      "TOOL RUN_OCR {}", "TOOL FIND_TEXT {\"keywords\": [\"prices\"]}",
      "TOOL COMPUTE " + Json{{"op", "SUM"}, {"operand_ids", picked}}.dump(), "TOOL GROUND_ANSWER {}",
      "TOOL FINISH {}"});
  PipelineConfig cfg;
  cfg.planner.policy = PolicyKind::Llm;
  const auto out = run_pipeline(DocumentInput::parsed(r.doc), "What do the first and third items cost together?", svc, cfg);
  ASSERT_TRUE(out.answer.text);
  EXPECT_DOUBLE_EQ(*parse_number(*out.answer.text), want);
  EXPECT_EQ(out.answer.method, GroundingMethod::Operands);
  EXPECT_EQ(out.answer.regions,
            (std::vector<BBox>{r.doc.find_segment(ids[0])->bbox, r.doc.find_segment(ids[2])->bbox}));
}

TEST(RunPipelineTest, RetryableToolErrorIsAnObservation) {
  const auto r = receipt(3);
  Services svc = hermetic();
  svc.qa = std::make_shared<ThrowingQa>(true);
  const auto out = run_pipeline(DocumentInput::parsed(r.doc), "What is the total?", svc, {});
  bool seen = false;
  for (const auto& s : out.trace) seen = seen || s.observation.contains("retryable");
  EXPECT_TRUE(seen);
  EXPECT_EQ(out.trace.back().action.tool, Tool::Finish);
}

TEST(RunPipelineTest, FatalToolErrorCarriesTrace) {
  const auto r = receipt(3);
  Services svc = hermetic();
  svc.qa = std::make_shared<ThrowingQa>(false);
  try {
    run_pipeline(DocumentInput::parsed(r.doc), "What is the total?", svc, {});
    FAIL();
  } catch (const EpisodeError& e) {
    ASSERT_FALSE(e.trace().empty());
    EXPECT_EQ(e.trace().back().action.tool, Tool::AskQa);
    EXPECT_EQ(e.trace().back().observation["fatal"], true);
  }
}

TEST(RunPipelineTest, LlmWithoutClientIsConfigError) {
  PipelineConfig cfg;
  cfg.planner.policy = PolicyKind::Llm;
  EXPECT_THROW(run_pipeline(DocumentInput::parsed(receipt(3).doc), "q", hermetic(), cfg), ConfigError);
}

TEST(TraceTest, JsonlLinesValidate) {
  const auto r = receipt(3);
  const auto out = run_pipeline(DocumentInput::parsed(r.doc), "What is the total?", hermetic(), {});
  std::istringstream in(trace_to_jsonl(out.trace));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(validate_trace_line(line), "") << line;
    const Json j = Json::parse(line);
    EXPECT_EQ(j["v"], kTraceSchemaVersion);
    EXPECT_EQ(j["step"], n);
    ++n;
  }
  EXPECT_EQ(n, static_cast<int>(out.trace.size()));
  EXPECT_NE(validate_trace_line("{}"), "");
  EXPECT_NE(validate_trace_line("nope"), "");
  EXPECT_NE(validate_trace_line(R"({"v":1,"step":0,"tool":"RUN_OCR","args":{},"observation":{},"rationale":"","elapsed_ms":0,"extra":1})"), "");
}
