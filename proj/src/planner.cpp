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

#include "docground/planner.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "docground/embedded_data.hpp"
#include "docground/text.hpp"

namespace docground {

namespace {

constexpr std::array<std::string_view, 6> kToolNames = {"RUN_OCR",       "FIND_TEXT", "ASK_QA",
                                                        "COMPUTE",       "GROUND_ANSWER",
                                                        "FINISH"};

// Labels that mark totals and payment lines rather than line items.
constexpr std::array<std::string_view, 19> kSummaryWords = {
    "total",  "subtotal", "sub",     "tax",     "vat",    "tip",    "gratuity",
    "change", "cash",     "balance", "due",     "discount", "amount", "paid",
    "payment", "card",    "tendered", "rounding", "service"};

std::string fmt_double(double v, int places) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, v);
  return buf;
}

std::vector<std::string> string_array(const Json& args, const char* key) {
  const Json& value = args.at(key);
  if (!value.is_array()) throw ParseError(std::string("'") + key + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& item : value) {
    if (!item.is_string()) throw ParseError(std::string("'") + key + "' must be an array of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

std::string optional_string(const Json& args, const char* key, std::string fallback) {
  if (!args.contains(key)) return fallback;
  if (!args[key].is_string()) throw ParseError(std::string("'") + key + "' must be a string");
  return args[key].get<std::string>();
}

// Cuts at a code point boundary so the prompt stays valid UTF-8.
std::string truncate_utf8(const std::string& s, std::size_t limit) {
  if (s.size() <= limit) return s;
  std::size_t cut = limit;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return s.substr(0, cut) + "...";
}

std::vector<std::string> all_segment_ids(const DocumentRecord& doc) {
  std::vector<std::string> ids;
  for (const auto& s : doc.segments) ids.push_back(s.id);
  return ids;
}

const DocumentRecord& require_doc(const PlannerState& state, Tool tool) {
  if (!state.doc) throw ParseError(std::string(to_string(tool)) + " needs RUN_OCR first");
  return *state.doc;
}

}  // namespace

std::string_view to_string(Tool tool) { return kToolNames[static_cast<std::size_t>(tool)]; }

Tool tool_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kToolNames.size(); ++i) {
    if (kToolNames[i] == name) return static_cast<Tool>(i);
  }
  throw ParseError("unknown tool '" + std::string(name) + "'");
}

std::string_view to_string(PolicyKind policy) {
  return policy == PolicyKind::Llm ? "llm" : "heuristic";
}

PolicyKind policy_from_string(std::string_view name) {
  if (name == "llm") return PolicyKind::Llm;
  if (name == "heuristic") return PolicyKind::Heuristic;
  throw ConfigError("unknown policy '" + std::string(name) + "' (expected llm or heuristic)");
}

void PlannerConfig::validate() const {
  if (max_steps < 4) throw ConfigError("planner max_steps must be >= 4");
  if (max_rationale_tokens == 0) throw ConfigError("planner max_rationale_tokens must be positive");
  if (!(temperature >= 0.0)) throw ConfigError("planner temperature must be >= 0");
}

void PipelineConfig::validate() const {
  planner.validate();
  retrieval.validate();
  qa.validate();
  grounding.validate();
}

std::string ScriptedPlannerClient::complete(const PlannerRequest& request) {
  std::lock_guard lock(mutex_);
  prompts_.push_back(request.prompt);
  if (next_ >= replies_.size()) throw ServiceError("scripted planner has no replies left");
  return replies_[next_++];
}

std::vector<std::string> ScriptedPlannerClient::prompts() const {
  std::lock_guard lock(mutex_);
  return prompts_;
}

std::string RemotePlannerClient::complete(const PlannerRequest& request) {
  const Json response = client_->call(make_envelope(
      "plan", Json{{"prompt", request.prompt},
                   {"temperature", request.temperature},
                   {"max_tokens", request.max_tokens}}));
  const Json& payload = envelope_payload(response, "plan");
  if (!payload.contains("text") || !payload["text"].is_string()) {
    throw ParseError("plan response payload needs a string 'text'");
  }
  return payload["text"].get<std::string>();
}

DocumentInput DocumentInput::parsed(DocumentRecord doc) {
  DocumentInput in;
  in.image_ref = doc.image_ref.value_or("");
  in.doc = std::move(doc);
  return in;
}

DocumentInput DocumentInput::image(std::string image_ref) {
  DocumentInput in;
  in.image_ref = std::move(image_ref);
  return in;
}

std::optional<ComputeOp> detect_computational(std::string_view question_text) {
  const auto tokens = alnum_tokens(question_text);
  auto has = [&](std::string_view word) {
    return std::find(tokens.begin(), tokens.end(), word) != tokens.end();
  };
  auto has_pair = [&](std::string_view a, std::string_view b) {
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
      if (tokens[i] == a && tokens[i + 1] == b) return true;
    }
    return false;
  };
  if (has("sum") || has_pair("total", "of") || has("add")) return ComputeOp::Sum;
  if (has_pair("how", "many") || has("count")) return ComputeOp::Count;
  if (has("average") || has("mean")) return ComputeOp::Mean;
  if (has("minimum") || has("lowest")) return ComputeOp::Min;
  if (has("maximum") || has("highest")) return ComputeOp::Max;
  return std::nullopt;
}

std::vector<NumericValue> find_numeric_operands(const DocumentRecord& doc,
                                                const LayoutConfig& layout) {
  struct LineValue {
    std::optional<NumericValue> value;
  };
  std::vector<LineValue> lines;
  for (const auto& members : cluster_lines(doc.segments, layout)) {
    LineValue line;
    std::optional<std::size_t> numeric;
    for (std::size_t k = members.size(); k-- > 0;) {
      if (parse_number(doc.segments[members[k]].text)) {
        numeric = k;
        break;
      }
    }
    bool labeled = false;
    bool summary = false;
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (numeric && k == *numeric) continue;
      for (const auto& token : alnum_tokens(doc.segments[members[k]].text)) {
        const bool alpha = std::any_of(token.begin(), token.end(), [](char c) {
          return (c >= 'a' && c <= 'z') || static_cast<unsigned char>(c) >= 0x80;
        });
        labeled = labeled || alpha;
        summary = summary || std::find(kSummaryWords.begin(), kSummaryWords.end(), token) !=
                                 kSummaryWords.end();
      }
    }
    if (numeric && labeled && !summary) {
      const TextSegment& seg = doc.segments[members[*numeric]];
      line.value = NumericValue{*parse_number(seg.text), seg.id, seg.text};
    }
    lines.push_back(std::move(line));
  }

  std::size_t best_start = 0;
  std::size_t best_len = 0;
  for (std::size_t i = 0; i < lines.size();) {
    if (!lines[i].value) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < lines.size() && lines[j].value) ++j;
    if (j - i > best_len) {
      best_start = i;
      best_len = j - i;
    }
    i = j;
  }
  std::vector<NumericValue> out;
  for (std::size_t i = best_start; i < best_start + best_len; ++i) out.push_back(*lines[i].value);
  return out;
}

Action heuristic_policy(const PlannerState& state, const PlannerConfig& config,
                        const LayoutConfig& layout) {
  auto answer_step = [&]() -> Action {
    if (state.doc && state.refinements == 0) {
      if (const auto op = detect_computational(state.question)) {
        const auto operands = find_numeric_operands(*state.doc, layout);
        if (!operands.empty()) {
          Json ids = Json::array();
          for (const auto& o : operands) ids.push_back(o.source_segment_id);
          return {Tool::Compute,
                  Json{{"op", to_string(*op)}, {"operand_ids", std::move(ids)}},
                  "aggregate question: " + std::string(to_string(*op)) + " over " +
                      std::to_string(operands.size()) + " numeric line items"};
        }
      }
    }
    return {Tool::AskQa, Json::object(),
            config.ablations.no_retrieval ? "ask the QA model over all segments"
                                          : "ask the QA model over the retrieved context"};
  };

  switch (state.phase) {
    case Phase::Fresh:
      return {Tool::RunOcr, Json::object(), "extract text segments and reading order"};
    case Phase::Parsed:
      if (config.ablations.no_retrieval) return answer_step();
      return {Tool::FindText, Json{{"keywords", state.question_keywords}},
              "retrieve segments matching the question keywords"};
    case Phase::Retrieved:
      return answer_step();
    case Phase::Answered:
      return {Tool::GroundAnswer, Json::object(),
              state.compute ? "ground the computed value on its operands"
                            : "locate the answer text on the page"};
    case Phase::Grounded: {
      const double confidence = state.last_grounding_confidence.value_or(0.0);
      if (confidence < config.confidence_floor && state.refinements < config.max_refinements &&
          !config.ablations.no_retrieval && !state.compute && state.answer_text) {
        std::vector<std::string> keywords = state.question_keywords;
        for (auto& k : extract_keywords(*state.answer_text)) {
          if (std::find(keywords.begin(), keywords.end(), k) == keywords.end()) {
            keywords.push_back(std::move(k));
          }
        }
        return {Tool::FindText,
                Json{{"query", state.question + " " + *state.answer_text}, {"keywords", keywords}},
                "grounding confidence " + fmt_double(confidence, 2) + " below floor " +
                    fmt_double(config.confidence_floor, 2) + "; retry retrieval with answer tokens"};
      }
      return {Tool::Finish, Json::object(),
              "answer grounded with confidence " + fmt_double(confidence, 2)};
    }
    case Phase::Unanswerable:
      return {Tool::Finish, Json::object(), "no answer supported by the context"};
  }
  return {Tool::Finish, Json::object(), ""};
}

std::string build_planner_prompt(const PlannerState& state, const PlannerConfig& config) {
  std::ostringstream out;
  out << kPlannerPromptVersion << '\n'
      << "You plan tool calls for grounded question answering over one document page.\n"
      << "Tools:\n"
      << "RUN_OCR {}  extract text segments in reading order\n"
      << "FIND_TEXT {\"keywords\": [...], \"query\": \"...\"}  hybrid keyword and semantic search\n"
      << "ASK_QA {\"context_ids\": [...]}  answer from context, default the last FIND_TEXT result\n"
      << "COMPUTE {\"op\": \"SUM|COUNT|MIN|MAX|MEAN\", \"operand_ids\": [...]}  arithmetic over "
         "numeric segments\n"
      << "GROUND_ANSWER {}  align the last answer with page regions\n"
      << "FINISH {}  return the best grounded answer\n";
  if (config.ablations.no_retrieval) out << "FIND_TEXT is disabled for this run.\n";
  out << "Reply with optional lines \"THINK <reasoning>\" followed by exactly one line "
         "\"TOOL <NAME> <json object>\".\n\n"
      << planner_examples() << '\n'
      << "Question: " << state.question << '\n'
      << "History:\n";
  if (state.history.empty()) out << "(none)\n";
  for (const auto& step : state.history) {
    out << "step " << step.step_index << ": TOOL " << to_string(step.action.tool) << ' '
        << step.action.args.dump() << '\n'
        << "  observation: " << truncate_utf8(step.observation.dump(), kObservationPromptLimit)
        << '\n';
  }
  out << "Next:";
  return out.str();
}

Action parse_planner_reply(std::string_view reply, std::size_t max_rationale_tokens) {
  std::vector<std::string> thoughts;
  std::optional<Action> action;
  std::istringstream lines{std::string(reply)};
  std::string raw;
  while (std::getline(lines, raw)) {
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line == "THINK" || line.starts_with("THINK ")) {
      thoughts.emplace_back(trim(line.substr(5)));
      continue;
    }
    if (!line.starts_with("TOOL ")) {
      throw ParseError("unexpected line in planner reply: " + std::string(line.substr(0, 80)));
    }
    if (action) throw ParseError("planner reply has more than one TOOL line");
    std::string_view rest = trim(line.substr(5));
    const std::size_t space = rest.find_first_of(" \t");
    Action a;
    a.tool = tool_from_string(rest.substr(0, space));
    const std::string_view body = space == std::string_view::npos ? "" : trim(rest.substr(space));
    if (!body.empty()) {
      try {
        a.args = Json::parse(body);
      } catch (const Json::exception& e) {
        throw ParseError(std::string("planner action args are not JSON: ") + e.what());
      }
      if (!a.args.is_object()) throw ParseError("planner action args must be a JSON object");
    }
    action = std::move(a);
  }
  if (!action) throw ParseError("planner reply has no TOOL line");

  std::size_t kept = 0;
  for (const auto& t : thoughts) {
    for (const auto token : split_whitespace(t)) {
      if (kept == max_rationale_tokens) break;
      if (kept) action->rationale += ' ';
      action->rationale += token;
      ++kept;
    }
  }
  return *action;
}

std::string format_planner_reply(const Action& action) {
  std::string out;
  if (!action.rationale.empty()) out += "THINK " + action.rationale + "\n";
  out += "TOOL " + std::string(to_string(action.tool)) + " " + action.args.dump();
  return out;
}

Json box_to_json(const BBox& box) { return Json::array({box.x_min, box.y_min, box.x_max, box.y_max}); }

BBox box_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4 ||
      !std::all_of(j.begin(), j.end(), [](const Json& v) { return v.is_number(); })) {
    throw ParseError("box must be an array of 4 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

Json grounded_answer_to_json(const GroundedAnswer& answer) {
  Json regions = Json::array();
  for (const auto& r : answer.regions) regions.push_back(box_to_json(r));
  return Json{{"answer", answer.text ? Json(*answer.text) : Json(nullptr)},
              {"method", to_string(answer.method)},
              {"confidence", answer.confidence},
              {"regions", std::move(regions)},
              {"merged_region",
               answer.merged_region ? box_to_json(*answer.merged_region) : Json(nullptr)}};
}

Json trace_step_to_json(const TraceStep& step) {
  return Json{{"v", kTraceSchemaVersion},
              {"step", step.step_index},
              {"tool", to_string(step.action.tool)},
              {"args", step.action.args},
              {"observation", step.observation},
              {"rationale", step.action.rationale},
              {"elapsed_ms", static_cast<double>(step.elapsed.count()) / 1000.0}};
}

std::string trace_to_jsonl(std::span<const TraceStep> trace) {
  std::string out;
  for (const auto& step : trace) out += trace_step_to_json(step).dump() + "\n";
  return out;
}

std::string validate_trace_line(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception& e) {
    return std::string("not JSON: ") + e.what();
  }
  if (!j.is_object()) return "record is not an object";
  static const std::array<std::string_view, 7> kKeys = {"v",           "step",      "tool",
                                                        "args",        "observation",
                                                        "rationale",   "elapsed_ms"};
  for (auto key : kKeys) {
    if (!j.contains(std::string(key))) return "missing field '" + std::string(key) + "'";
  }
  if (j.size() != kKeys.size()) return "unexpected extra fields";
  if (!j["v"].is_number_integer() || j["v"].get<int>() != kTraceSchemaVersion) {
    return "unsupported schema version";
  }
  if (!j["step"].is_number_unsigned()) return "'step' must be a non-negative integer";
  if (!j["tool"].is_string()) return "'tool' must be a string";
  try {
    tool_from_string(j["tool"].get<std::string>());
  } catch (const ParseError& e) {
    return e.what();
  }
  if (!j["args"].is_object()) return "'args' must be an object";
  if (!j["observation"].is_object()) return "'observation' must be an object";
  if (!j["rationale"].is_string()) return "'rationale' must be a string";
  if (!j["elapsed_ms"].is_number() || j["elapsed_ms"].get<double>() < 0.0) {
    return "'elapsed_ms' must be a non-negative number";
  }
  return {};
}

std::string_view planner_examples() { return embedded::kPlannerExamples; }

namespace {

struct Episode {
  const DocumentInput& input;
  const Services& services;
  const PipelineConfig& config;
  QaBackend& qa;
  PlannerState state;
  std::vector<std::string> qa_context_ids;  // member segments of the last QA context
  std::vector<std::string> warnings;

  // Fills defaults from the state and checks the action is executable.
  // ParseError marks an invalid action.
  Action resolve(Action a) const {
    const auto& s = state;
    if (!a.args.is_object()) throw ParseError("action args must be an object");
    switch (a.tool) {
      case Tool::RunOcr:
        if (s.phase != Phase::Fresh) throw ParseError("RUN_OCR already ran");
        a.args = Json::object();
        break;
      case Tool::FindText: {
        require_doc(s, a.tool);
        if (config.planner.ablations.no_retrieval) {
          throw ParseError("FIND_TEXT is disabled by the no_retrieval ablation");
        }
        const auto keywords =
            a.args.contains("keywords") ? string_array(a.args, "keywords") : s.question_keywords;
        std::size_t top_k = config.retrieval.top_k;
        if (a.args.contains("top_k")) {
          if (!a.args["top_k"].is_number_unsigned() || a.args["top_k"].get<std::size_t>() == 0) {
            throw ParseError("'top_k' must be a positive integer");
          }
          top_k = a.args["top_k"].get<std::size_t>();
        }
        a.args = Json{{"query", optional_string(a.args, "query", s.question)},
                      {"keywords", keywords},
                      {"top_k", top_k}};
        break;
      }
      case Tool::AskQa: {
        const DocumentRecord& doc = require_doc(s, a.tool);
        std::vector<std::string> ids;
        if (a.args.contains("context_ids")) {
          ids = string_array(a.args, "context_ids");
          for (const auto& id : ids) {
            if (!doc.find_segment(id)) throw ParseError("unknown segment id '" + id + "'");
          }
        } else if (s.retrieved_ids) {
          ids = *s.retrieved_ids;
        } else {
          ids = all_segment_ids(doc);
        }
        a.args = Json{{"question", optional_string(a.args, "question", s.question)},
                      {"context_ids", ids}};
        break;
      }
      case Tool::Compute: {
        const DocumentRecord& doc = require_doc(s, a.tool);
        if (!a.args.contains("op") || !a.args["op"].is_string()) {
          throw ParseError("COMPUTE needs a string 'op'");
        }
        const ComputeOp op = compute_op_from_string(a.args["op"].get<std::string>());
        if (!a.args.contains("operand_ids")) throw ParseError("COMPUTE needs 'operand_ids'");
        const auto ids = string_array(a.args, "operand_ids");
        if (ids.empty()) throw ParseError("COMPUTE needs at least one operand");
        for (const auto& id : ids) {
          const TextSegment* seg = doc.find_segment(id);
          if (!seg) throw ParseError("unknown segment id '" + id + "'");
          if (!parse_number(seg->text)) throw ParseError("segment '" + id + "' is not numeric");
        }
        a.args = Json{{"op", to_string(op)}, {"operand_ids", ids}};
        break;
      }
      case Tool::GroundAnswer:
        if (s.phase != Phase::Answered || !s.answer_text) {
          throw ParseError("GROUND_ANSWER needs an answer from ASK_QA or COMPUTE");
        }
        a.args = Json{{"mode", s.compute ? "operands" : "text"}, {"answer", *s.answer_text}};
        break;
      case Tool::Finish:
        a.args = Json::object();
        break;
    }
    return a;
  }

  Json run_ocr_step() {
    Json obs;
    if (input.doc) {
      input.doc->validate();
      state.doc = *input.doc;
      obs["source"] = "preparsed";
    } else {
      if (!services.ocr) throw ConfigError("no OCR client configured for image input");
      try {
        state.doc = run_ocr(input.image_ref, *services.ocr, config.layout);
        obs["source"] = "ocr";
      } catch (const RetryableError& e) {
        DocumentRecord empty;
        empty.doc_id = input.image_ref;
        state.doc = std::move(empty);
        obs = Json{{"error", e.what()}, {"retryable", true}};
      }
    }
    obs["doc_id"] = state.doc->doc_id;
    obs["segments"] = state.doc->segments.size();
    state.phase = Phase::Parsed;
    return obs;
  }

  Json find_text_step(const Json& args) {
    const RetrievalQuery query{args["query"].get<std::string>(), string_array(args, "keywords")};
    RetrievalConfig retrieval = config.retrieval;
    retrieval.top_k = args["top_k"].get<std::size_t>();
    Json obs{{"keywords", query.keywords}};
    std::vector<std::string> ids;
    try {
      const RetrievedContext ctx = find_text(*state.doc, query, *services.embedder, retrieval);
      Json items = Json::array();
      for (const auto& item : ctx.items) {
        ids.push_back(item.segment_id);
        items.push_back({{"id", item.segment_id},
                         {"text", state.doc->find_segment(item.segment_id)->text},
                         {"score", item.semantic_score},
                         {"hits", item.keyword_hits}});
      }
      obs["items"] = std::move(items);
    } catch (const RetryableError& e) {
      obs = Json{{"error", e.what()}, {"retryable", true}, {"items", Json::array()}};
    }
    if (state.phase == Phase::Grounded) ++state.refinements;
    ++state.find_text_runs;
    state.retrieved_ids = std::move(ids);
    state.answer_text.reset();
    state.compute.reset();
    state.phase = Phase::Retrieved;
    return obs;
  }

  // Retrieved segments in rank order, optionally widened to their text lines.
  std::vector<TextSegment> build_context(const std::vector<std::string>& ids) {
    const DocumentRecord& doc = *state.doc;
    std::vector<TextSegment> context;
    qa_context_ids.clear();
    if (!config.planner.expand_context_to_lines) {
      for (const auto& id : ids) {
        context.push_back(*doc.find_segment(id));
        qa_context_ids.push_back(id);
      }
      return context;
    }
    const auto lines = group_segments(doc, GroupKind::Line, config.layout);
    std::unordered_map<std::string, std::size_t> line_of;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      for (const auto& m : lines[i].member_ids) line_of.emplace(m, i);
    }
    std::vector<bool> taken(lines.size(), false);
    for (const auto& id : ids) {
      const std::size_t li = line_of.at(id);
      if (taken[li]) continue;
      taken[li] = true;
      const SegmentGroup& line = lines[li];
      TextSegment pseudo;
      pseudo.id = line.group_id;
      pseudo.bbox = line.bbox;
      pseudo.order_index = doc.segments.size();
      for (const auto& m : line.member_ids) {
        const TextSegment* seg = doc.find_segment(m);
        if (!pseudo.text.empty()) pseudo.text += ' ';
        pseudo.text += seg->text;
        pseudo.confidence = std::min(pseudo.confidence, seg->confidence);
        pseudo.order_index = std::min(pseudo.order_index, seg->order_index);
        qa_context_ids.push_back(m);
      }
      context.push_back(std::move(pseudo));
    }
    return context;
  }

  Json ask_qa_step(const Json& args) {
    const std::string question = args["question"].get<std::string>();
    const auto context = build_context(string_array(args, "context_ids"));
    Json ctx_ids = Json::array();
    for (const auto& s : context) ctx_ids.push_back(s.id);
    Json obs{{"backend", qa.name()}, {"context", std::move(ctx_ids)}};
    std::optional<std::string> answer;
    try {
      QaOutcome outcome = ask_qa(question, context, *state.doc, qa, config.qa);
      warnings.insert(warnings.end(), outcome.warnings.begin(), outcome.warnings.end());
      answer = outcome.result.answer_text;
      obs["truncated"] = outcome.truncated;
      if (answer && config.planner.repair_numeric_answers) {
        std::string repaired = repair_numeric_confusions(*answer);
        if (repaired != *answer) {
          obs["repaired_from"] = *answer;
          answer = std::move(repaired);
        }
      }
    } catch (const RetryableError& e) {
      obs["error"] = e.what();
      obs["retryable"] = true;
    }
    obs["answer"] = answer ? Json(*answer) : Json(nullptr);
    state.compute.reset();
    state.answer_text = answer;
    state.phase = answer ? Phase::Answered : Phase::Unanswerable;
    return obs;
  }

  Json compute_step(const Json& args) {
    const ComputeOp op = compute_op_from_string(args["op"].get<std::string>());
    std::vector<NumericValue> operands;
    Json listed = Json::array();
    for (const auto& id : string_array(args, "operand_ids")) {
      const TextSegment* seg = state.doc->find_segment(id);
      operands.push_back({*parse_number(seg->text), id, seg->text});
      listed.push_back({{"id", id}, {"raw", seg->text}, {"value", operands.back().value}});
    }
    ComputeRequest request(op, std::move(operands));
    const double value = compute(request);
    std::string text = format_result(request, value);
    qa_context_ids.clear();
    for (const auto& o : request.operands()) qa_context_ids.push_back(o.source_segment_id);
    Json obs{{"op", to_string(op)}, {"value", value}, {"answer", text}, {"operands", listed}};
    state.compute = std::move(request);
    state.answer_text = std::move(text);
    state.phase = Phase::Answered;
    return obs;
  }

  Json ground_step(const Json& args) {
    const std::string answer = args["answer"].get<std::string>();
    GroundedAnswer grounded;
    Json obs;
    if (state.compute) {
      grounded = ground_operands(*state.compute, *state.doc, answer);
      obs = grounded_answer_to_json(grounded);
      Json ids = Json::array();
      for (const auto& o : state.compute->operands()) ids.push_back(o.source_segment_id);
      obs["segment_ids"] = std::move(ids);
    } else {
      const std::unordered_set<std::string> context(qa_context_ids.begin(), qa_context_ids.end());
      GroundingOutcome outcome =
          ground_answer(answer, *state.doc, context, *services.embedder, config.grounding);
      warnings.insert(warnings.end(), outcome.warnings.begin(), outcome.warnings.end());
      grounded = std::move(outcome.answer);
      obs = grounded_answer_to_json(grounded);
      obs["segment_ids"] = outcome.winner ? Json(outcome.winner->segment_ids) : Json::array();
    }
    state.last_grounding_confidence = grounded.confidence;
    if (!state.best || grounded.confidence > state.best->confidence) state.best = grounded;
    state.phase = Phase::Grounded;
    return obs;
  }

  GroundedAnswer final_answer() const {
    return state.best ? *state.best : GroundedAnswer::no_answer();
  }

  Json execute(const Action& action) {
    switch (action.tool) {
      case Tool::RunOcr: return run_ocr_step();
      case Tool::FindText: return find_text_step(action.args);
      case Tool::AskQa: return ask_qa_step(action.args);
      case Tool::Compute: return compute_step(action.args);
      case Tool::GroundAnswer: return ground_step(action.args);
      case Tool::Finish: return grounded_answer_to_json(final_answer());
    }
    return Json::object();
  }
};

}  // namespace

EpisodeResult run_pipeline(const DocumentInput& input, std::string_view question,
                           const Services& services, const PipelineConfig& config) {
  config.validate();
  if (!services.embedder) throw ConfigError("no embedding provider configured");
  const bool llm = config.planner.policy == PolicyKind::Llm;
  if (llm && !services.planner) throw ConfigError("LLM policy needs a planner client");
  std::shared_ptr<QaBackend> qa =
      config.planner.ablations.lookup_only_qa ? mock_extractive_qa() : services.qa;
  if (!qa) throw ConfigError("no QA backend configured");

  Episode ep{input, services, config, *qa, {}, {}, {}};
  ep.state.question = std::string(question);
  ep.state.question_keywords = extract_keywords(question);

  EpisodeResult result;
  bool fallback = false;

  auto next_action = [&]() -> Action {
    const Action heuristic = heuristic_policy(ep.state, config.planner, config.layout);
    if (!llm || fallback) {
      Action a = ep.resolve(heuristic);
      if (fallback) a.rationale = "[fallback] " + a.rationale;
      return a;
    }
    std::string prompt = build_planner_prompt(ep.state, config.planner);
    std::string reason;
    for (int attempt = 0; attempt < 2; ++attempt) {
      std::string reply;
      try {
        reply = services.planner->complete(
            {prompt, config.planner.temperature, config.planner.max_rationale_tokens + 64});
      } catch (const Error& e) {
        reason = std::string("planner unavailable: ") + e.what();
        break;
      }
      try {
        return ep.resolve(parse_planner_reply(reply, config.planner.max_rationale_tokens));
      } catch (const ParseError& e) {
        reason = e.what();
        prompt += "\nYour previous reply was rejected: " + reason +
                  "\nReply again with exactly one TOOL line.\nNext:";
      }
    }
    fallback = true;
    result.planner_fallback = true;
    ep.warnings.push_back("planner fell back to heuristic policy: " + reason);
    Action a = ep.resolve(heuristic);
    a.rationale = "[fallback] " + reason + "; " + a.rationale;
    return a;
  };

  auto run_step = [&](Action action) {
    TraceStep step;
    step.step_index = ep.state.history.size();
    const auto start = std::chrono::steady_clock::now();
    try {
      step.observation = ep.execute(action);
    } catch (const RetryableError& e) {
      step.observation = Json{{"error", e.what()}, {"retryable", true}};
    } catch (const Error& e) {
      step.action = std::move(action);
      step.observation = Json{{"error", e.what()}, {"fatal", true}};
      step.elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
          std::chrono::steady_clock::now() - start);
      ep.state.history.push_back(std::move(step));
      throw EpisodeError(std::string(to_string(ep.state.history.back().action.tool)) +
                             " failed: " + e.what(),
                         ep.state.history);
    }
    step.elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - start);
    step.action = std::move(action);
    ep.state.history.push_back(std::move(step));
  };

  bool finished = false;
  while (ep.state.history.size() < config.planner.max_steps) {
    Action action = next_action();
    const bool finish = action.tool == Tool::Finish;
    run_step(std::move(action));
    if (finish) {
      finished = true;
      break;
    }
  }
  if (!finished) {
    run_step({Tool::Finish, Json::object(), "step budget exhausted; return the best answer so far"});
  }

  result.answer = ep.final_answer();
  result.trace = std::move(ep.state.history);
  result.warnings = std::move(ep.warnings);
  return result;
}

}  // namespace docground
