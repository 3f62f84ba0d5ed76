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

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docground/document.hpp"
#include "docground/metrics.hpp"
#include "docground/service.hpp"

namespace docground {

struct QaRecord {
  Question question;
  QaGroundTruth truth;

  friend bool operator==(const QaRecord&, const QaRecord&) = default;
};

// One substituted character of synthetic OCR noise. index counts code points.
struct NoiseEdit {
  std::string doc_id;
  std::string segment_id;
  std::size_t index = 0;
  std::string original;
  std::string replacement;

  friend bool operator==(const NoiseEdit&, const NoiseEdit&) = default;
};

struct DatasetBundle {
  std::string name;
  std::vector<QaRecord> records;
  std::map<std::string, DocumentRecord> docs;
  std::vector<NoiseEdit> noise_log;

  // Throws ConsistencyError naming unknown doc ids and duplicate question ids.
  void validate() const;
  std::vector<QaGroundTruth> truths() const;

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

// Layout: manifest.json, docs/<doc_id>.json (canonical OCR JSON), qa.jsonl and,
// when present, noise_log.jsonl.
DatasetBundle load_bundle(const std::filesystem::path& dir);
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

Json qa_record_to_json(const QaRecord& record);
QaRecord qa_record_from_json(const Json& j);

enum class ExternalFormat { DocVqa, Funsd, Cord, Sroie };

ExternalFormat external_format_from_string(std::string_view tag);
std::string_view to_string(ExternalFormat format);

// Input files per format:
//   docvqa: one QA file {"data": [{questionId, question, answers, image}]} and
//           OCR files {"recognitionResults": [{width, height, lines}]} whose
//           stem matches the image stem; no gt boxes.
//   funsd:  one {"form": [...]} file per document; linked question -> answer
//           entities become QA pairs.
//   cord:   one {"valid_line": [...], "meta": {...}} file per document; every
//           category that occurs once becomes a QA pair.
//   sroie:  <stem>.txt OCR lines "x1,y1,...,x4,y4,text" plus <stem>.json key
//           values; the box is the union of the OCR lines holding the value.
// Throws ParseError naming the file and record.
DatasetBundle adapt_external(ExternalFormat format, std::span<const std::filesystem::path> paths);

// Question templates used by the entity adapters.
const Json& qa_templates();

struct SyntheticSpec {
  double receipt_fraction = 0.5;  // remaining documents are forms
  std::size_t min_items = 3;
  std::size_t max_items = 6;
  std::size_t distractors = 2;
  // Distractors share question keywords and precede the fields.
  bool keyword_distractors = false;
  double noise_rate = 0.0;  // per non-space character

  void validate() const;
};

// Distractor-heavy preset: 20 keyword-overlapping distractors per document.
SyntheticSpec distractor_heavy_spec();

// Receipts and forms with constructed answers and boxes. Bit-reproducible
// from (seed, n_docs, spec).
DatasetBundle generate_synthetic(std::uint64_t seed, std::size_t n_docs, const SyntheticSpec& spec = {});

}  // namespace docground
