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

#include "docground/qa.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "docground/error.hpp"
#include "docground/retrieval.hpp"
#include "docground/text.hpp"

namespace docground {

void QaClientConfig::validate() const {
  if (!(temperature >= 0.0)) throw ConfigError("qa temperature must be >= 0");
  if (max_answer_tokens == 0) throw ConfigError("qa max_answer_tokens must be positive");
}

std::string escape_prompt_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\n') {
      out += "\\n";
    } else if (c == '\r') {
      out += "\\r";
    } else if (c == '[' && i + 1 < text.size() && text[i + 1] == '(') {
      out += "\\[";
    } else {
      out += c;
    }
  }
  return out;
}

std::string unescape_prompt_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\' || i + 1 == text.size()) {
      out += text[i];
      continue;
    }
    const char next = text[++i];
    switch (next) {
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: out += next; break;
    }
  }
  return out;
}

std::string build_prompt(std::string_view question, std::span<const TextSegment> context,
                         const DocumentRecord& doc, bool include_boxes) {
  std::vector<const TextSegment*> ordered;
  for (const auto& s : context) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(), [](const TextSegment* a, const TextSegment* b) {
    return a->order_index < b->order_index;
  });

  std::ostringstream out;
  out << "Answer the question about document " << escape_prompt_text(doc.doc_id)
      << " using only the OCR context lines below.\n";
  out << "Context:\n";
  if (ordered.empty()) out << "(no context)\n";
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    out << "[(" << (i + 1) << ")] ";
    if (include_boxes) {
      const BBox& b = ordered[i]->bbox;
      out << "{" << b.x_min << "," << b.y_min << "," << b.x_max << "," << b.y_max << "} ";
    }
    out << escape_prompt_text(ordered[i]->text) << '\n';
  }
  out << "Question: " << escape_prompt_text(question) << '\n';
  out << "Reply with the answer text only. If the context does not contain the answer, reply "
         "exactly: "
      << kNoAnswerSentinel << '\n';
  out << "Answer:";
  return out.str();
}

QaResult parse_answer(std::string_view reply, std::optional<double> confidence,
                      std::size_t max_tokens, bool* truncated) {
  if (truncated) *truncated = false;
  QaResult result;
  result.model_confidence = confidence ? std::clamp(*confidence, 0.0, 1.0) : 1.0;
  const std::string_view trimmed = trim(reply);
  if (trimmed.empty() || trimmed == kNoAnswerSentinel) return result;

  const auto tokens = split_whitespace(trimmed);
  if (tokens.size() > max_tokens) {
    if (truncated) *truncated = true;
    std::string cut;
    for (std::size_t i = 0; i < max_tokens; ++i) {
      if (i) cut += ' ';
      cut += tokens[i];
    }
    result.answer_text = std::move(cut);
  } else {
    result.answer_text = std::string(trimmed);
  }
  return result;
}

QaReply MockExtractiveQa::answer(const QaRequest& request) {
  const auto keywords = extract_keywords(request.question);
  for (const auto& text : request.context_texts) {
    const auto tokens = split_whitespace(text);
    std::optional<std::size_t> last_match;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (count_keyword_hits(tokens[i], keywords) > 0) last_match = i;
    }
    if (!last_match || *last_match + 1 >= tokens.size()) continue;
    const std::string_view first = tokens[*last_match + 1];
    const std::string_view last = tokens.back();
    const auto begin = static_cast<std::size_t>(first.data() - text.data());
    const auto end = static_cast<std::size_t>(last.data() + last.size() - text.data());
    return {text.substr(begin, end - begin), std::nullopt};
  }
  return {std::string(kNoAnswerSentinel), std::nullopt};
}

std::shared_ptr<QaBackend> mock_extractive_qa() { return std::make_shared<MockExtractiveQa>(); }

QaReply RemoteQaBackend::answer(const QaRequest& request) {
  const Json response = client_->call(make_envelope(
      "qa", Json{{"prompt", request.prompt},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_tokens}}));
  const Json& payload = envelope_payload(response, "qa");
  if (!payload.contains("text") || !payload["text"].is_string()) {
    throw ParseError("qa response payload needs a string 'text': " + payload.dump().substr(0, 200));
  }
  QaReply reply{payload["text"].get<std::string>(), std::nullopt};
  if (payload.contains("confidence") && payload["confidence"].is_number()) {
    reply.confidence = payload["confidence"].get<double>();
  }
  return reply;
}

QaOutcome ask_qa(std::string_view question, std::span<const TextSegment> context,
                 const DocumentRecord& doc, QaBackend& backend, const QaClientConfig& config) {
  config.validate();
  QaOutcome outcome;
  if (context.empty()) return outcome;

  QaRequest request;
  request.prompt = build_prompt(question, context, doc, config.include_boxes);
  request.question = std::string(question);
  for (const auto& s : context) request.context_texts.push_back(s.text);
  request.temperature = config.temperature;
  request.max_tokens = config.max_answer_tokens;

  const QaReply reply = backend.answer(request);
  outcome.backend_called = true;
  outcome.result = parse_answer(reply.text, reply.confidence, config.max_answer_tokens,
                                &outcome.truncated);
  if (outcome.truncated) {
    outcome.warnings.push_back("answer truncated to " + std::to_string(config.max_answer_tokens) +
                               " tokens");
  }
  return outcome;
}

namespace {

std::optional<char> confusion_digit(char c) {
  switch (c) {
    case 'O': case 'o': case 'D': return '0';
    case 'l': case 'I': case '|': return '1';
    case 'Z': return '2';
    case 'S': case 's': return '5';
    case 'B': return '8';
    default: return std::nullopt;
  }
}

bool is_separator(char c) {
  return c == '.' || c == ',' || c == ':' || c == '/' || c == '-';
}

std::string repair_token(std::string_view token) {
  std::size_t digits = 0, letters = 0, separators = 0;
  for (char c : token) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ++digits;
    } else if (is_separator(c)) {
      ++separators;
    } else if (confusion_digit(c)) {
      ++letters;
    } else if (c != '$' && c != '%' && c != '+') {
      return std::string(token);
    }
  }
  if (letters == 0 || separators == 0 || digits == 0 || letters >= digits) {
    return std::string(token);
  }
  std::string out(token);
  for (char& c : out) {
    if (auto d = confusion_digit(c)) c = *d;
  }
  return out;
}

}  // namespace

std::string repair_numeric_confusions(std::string_view answer) {
  std::string out;
  std::size_t i = 0;
  while (i < answer.size()) {
    if (std::isspace(static_cast<unsigned char>(answer[i]))) {
      out += answer[i++];
      continue;
    }
    const std::size_t start = i;
    while (i < answer.size() && !std::isspace(static_cast<unsigned char>(answer[i]))) ++i;
    out += repair_token(answer.substr(start, i - start));
  }
  return out;
}

}  // namespace docground
