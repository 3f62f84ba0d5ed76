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

#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "docground/compute.hpp"
#include "docground/document.hpp"
#include "docground/error.hpp"
#include "docground/grounding.hpp"
#include "docground/ocr.hpp"
#include "docground/qa.hpp"
#include "docground/retrieval.hpp"
#include "docground/service.hpp"

namespace docground {

inline constexpr std::string_view kPlannerPromptVersion = "planner-prompt-v1";
inline constexpr std::size_t kObservationPromptLimit = 512;

enum class Tool { RunOcr, FindText, AskQa, Compute, GroundAnswer, Finish };

std::string_view to_string(Tool tool);
Tool tool_from_string(std::string_view name);  // "RUN_OCR", ...; ParseError otherwise

struct Action {
  Tool tool = Tool::Finish;
  Json args = Json::object();
  std::string rationale;
};

struct TraceStep {
  std::size_t step_index = 0;
  Action action;
  Json observation = Json::object();
  std::chrono::microseconds elapsed{0};
};

enum class PolicyKind { Llm, Heuristic };

std::string_view to_string(PolicyKind policy);
PolicyKind policy_from_string(std::string_view name);  // "llm" or "heuristic"

struct Ablations {
  bool no_retrieval = false;
  bool lookup_only_qa = false;
};

struct PlannerConfig {
  PolicyKind policy = PolicyKind::Heuristic;
  std::size_t max_steps = 8;
  double confidence_floor = 0.5;
  double temperature = 0.7;
  std::size_t max_rationale_tokens = 256;
  std::size_t max_refinements = 1;
  // Retrieved segments are widened to their whole text line before QA.
  bool expand_context_to_lines = true;
  // Apply repair_numeric_confusions to QA answers before grounding.
  bool repair_numeric_answers = true;
  Ablations ablations;

  void validate() const;  // ConfigError unless max_steps >= 4
};

struct PipelineConfig {
  PlannerConfig planner;
  RetrievalConfig retrieval;
  QaClientConfig qa;
  GroundingConfig grounding;
  LayoutConfig layout;

  void validate() const;
};

// Planner service: request payload {prompt, temperature, max_tokens},
// response payload {text}.
struct PlannerRequest {
  std::string prompt;
  double temperature = 0.7;
  std::size_t max_tokens = 320;
};

class PlannerClient {
 public:
  virtual ~PlannerClient() = default;
  virtual std::string complete(const PlannerRequest& request) = 0;
};

// Replays fixed replies in order; throws ServiceError once they run out.
class ScriptedPlannerClient final : public PlannerClient {
 public:
  explicit ScriptedPlannerClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const PlannerRequest& request) override;
  std::vector<std::string> prompts() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
  std::vector<std::string> prompts_;
};

class RemotePlannerClient final : public PlannerClient {
 public:
  explicit RemotePlannerClient(std::shared_ptr<ServiceClient> client) : client_(std::move(client)) {}
  std::string complete(const PlannerRequest& request) override;

 private:
  std::shared_ptr<ServiceClient> client_;
};

struct Services {
  std::shared_ptr<OcrClient> ocr;  // unused for pre-parsed documents
  std::shared_ptr<EmbeddingProvider> embedder;
  std::shared_ptr<QaBackend> qa;
  std::shared_ptr<PlannerClient> planner;  // LLM policy only
};

struct DocumentInput {
  std::optional<DocumentRecord> doc;
  std::string image_ref;

  static DocumentInput parsed(DocumentRecord doc);
  static DocumentInput image(std::string image_ref);
};

enum class Phase { Fresh, Parsed, Retrieved, Answered, Grounded, Unanswerable };

// Everything the policies may look at. Updated by the executor after each step.
struct PlannerState {
  std::string question;
  std::vector<std::string> question_keywords;
  Phase phase = Phase::Fresh;
  std::optional<DocumentRecord> doc;
  std::size_t find_text_runs = 0;
  std::optional<std::vector<std::string>> retrieved_ids;  // last FIND_TEXT, rank order
  std::optional<std::string> answer_text;                 // last QA or COMPUTE answer
  std::optional<ComputeRequest> compute;                  // set on the COMPUTE path
  std::optional<double> last_grounding_confidence;
  std::optional<GroundedAnswer> best;
  std::size_t refinements = 0;
  std::vector<TraceStep> history;
};

// Keyword rules over the question tokens, checked in the order SUM, COUNT,
// MEAN, MIN, MAX.
std::optional<ComputeOp> detect_computational(std::string_view question_text);

// Numeric operands for aggregate questions: the longest run of consecutive
// text lines that end in a number and carry a non-summary label (item lines
// rather than Subtotal/Tax/Total). Earliest run wins ties.
std::vector<NumericValue> find_numeric_operands(const DocumentRecord& doc,
                                                const LayoutConfig& layout = {});

// Fixed progression RUN_OCR -> FIND_TEXT -> ASK_QA | COMPUTE -> GROUND_ANSWER
// -> FINISH with at most max_refinements low-confidence retries.
Action heuristic_policy(const PlannerState& state, const PlannerConfig& config,
                        const LayoutConfig& layout = {});

std::string build_planner_prompt(const PlannerState& state, const PlannerConfig& config);

// Optional "THINK <text>" lines and exactly one "TOOL <NAME> [json object]"
// line. Throws ParseError otherwise. The rationale keeps at most
// max_rationale_tokens whitespace tokens.
Action parse_planner_reply(std::string_view reply, std::size_t max_rationale_tokens);

// Inverse of parse_planner_reply for a well-formed action.
std::string format_planner_reply(const Action& action);

struct EpisodeResult {
  GroundedAnswer answer;
  std::vector<TraceStep> trace;
  bool planner_fallback = false;
  std::vector<std::string> warnings;
};

// A fatal tool error; carries the trace up to and including the failed step.
class EpisodeError : public Error {
 public:
  EpisodeError(const std::string& message, std::vector<TraceStep> trace)
      : Error(message), trace_(std::move(trace)) {}
  const std::vector<TraceStep>& trace() const { return trace_; }

 private:
  std::vector<TraceStep> trace_;
};

EpisodeResult run_pipeline(const DocumentInput& input, std::string_view question,
                           const Services& services, const PipelineConfig& config);

Json box_to_json(const BBox& box);
BBox box_from_json(const Json& j);
Json grounded_answer_to_json(const GroundedAnswer& answer);

// Trace JSONL record: {v, step, tool, args, observation, rationale, elapsed_ms}.
inline constexpr int kTraceSchemaVersion = 1;
Json trace_step_to_json(const TraceStep& step);
std::string trace_to_jsonl(std::span<const TraceStep> trace);
// Empty when the line is a valid trace record, else the first problem found.
std::string validate_trace_line(std::string_view line);

// Loads the built-in few-shot examples shown to the LLM planner.
std::string_view planner_examples();

}  // namespace docground
