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

#include <atomic>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docground/document.hpp"
#include "docground/service.hpp"

namespace docground {

inline constexpr std::string_view kQaTemplateVersion = "qa-prompt-v1";

struct QaClientConfig {
  std::string endpoint;
  double temperature = 0.3;
  std::size_t max_answer_tokens = 128;
  // Prefix each context line with its box; off by default.
  bool include_boxes = false;

  void validate() const;
};

struct QaResult {
  std::optional<std::string> answer_text;  // nullopt is NO_ANSWER
  double model_confidence = 1.0;

  bool is_no_answer() const { return !answer_text.has_value(); }
};

struct QaRequest {
  std::string prompt;
  std::string question;
  // Context texts in retrieval rank order (the prompt lists them in reading order).
  std::vector<std::string> context_texts;
  double temperature = 0.3;
  std::size_t max_tokens = 128;
};

struct QaReply {
  std::string text;
  std::optional<double> confidence;
};

class QaBackend {
 public:
  virtual ~QaBackend() = default;
  virtual QaReply answer(const QaRequest& request) = 0;
  virtual std::string_view name() const = 0;
};

// Lookup-only backend. For each context text in order, finds the last
// whitespace token that contains a question keyword and returns every token
// after it in the same text. The first context text that yields a non-empty
// span wins; otherwise the no-answer sentinel.
class MockExtractiveQa final : public QaBackend {
 public:
  QaReply answer(const QaRequest& request) override;
  std::string_view name() const override { return "mock_extractive"; }
};

std::shared_ptr<QaBackend> mock_extractive_qa();

// Request payload {prompt, temperature, max_tokens}; response payload {text, confidence?}.
class RemoteQaBackend final : public QaBackend {
 public:
  explicit RemoteQaBackend(std::shared_ptr<ServiceClient> client) : client_(std::move(client)) {}
  QaReply answer(const QaRequest& request) override;
  std::string_view name() const override { return "remote"; }

 private:
  std::shared_ptr<ServiceClient> client_;
};

// Backslash-escapes '\\', line breaks and the "[(" context delimiter.
std::string escape_prompt_text(std::string_view text);
std::string unescape_prompt_text(std::string_view text);

// Context lines "[(i)] <text>" in reading order, then the question and the
// instruction to reply with the no-answer sentinel when unsupported.
std::string build_prompt(std::string_view question, std::span<const TextSegment> context,
                         const DocumentRecord& doc, bool include_boxes = false);

// Trims the reply; empty or sentinel replies become NO_ANSWER. Replies longer
// than max_tokens whitespace tokens are cut and *truncated is set.
QaResult parse_answer(std::string_view reply, std::optional<double> confidence,
                      std::size_t max_tokens, bool* truncated = nullptr);

struct QaOutcome {
  QaResult result;
  bool backend_called = false;
  bool truncated = false;
  std::vector<std::string> warnings;
};

// Empty context short-circuits to NO_ANSWER without calling the backend.
QaOutcome ask_qa(std::string_view question, std::span<const TextSegment> context,
                 const DocumentRecord& doc, QaBackend& backend, const QaClientConfig& config);

// Maps OCR digit confusions (O->0, l->1, S->5, ...) inside numeric-looking
// tokens, e.g. "71.8O" -> "71.80". Tokens without a digit and a separator are
// left alone.
std::string repair_numeric_confusions(std::string_view answer);

}  // namespace docground
