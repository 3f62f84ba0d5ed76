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

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "docground/geometry.hpp"
#include "docground/service.hpp"

namespace docground {

struct QaGroundTruth {
  std::string question_id;
  std::vector<std::string> answers;  // non-empty
  std::vector<BBox> gt_boxes;        // empty when the dataset has no boxes

  friend bool operator==(const QaGroundTruth&, const QaGroundTruth&) = default;
};

struct Prediction {
  std::string question_id;
  std::optional<std::string> answer_text;  // nullopt is NO_ANSWER
  std::optional<BBox> pred_box;
  double confidence = 0.0;
};

struct AnlsOptions {
  double tau = 0.5;
  bool normalize = true;  // apply normalize_for_match to both sides
};

// Exactly 0.50, 0.55, ..., 0.95.
std::array<double, 10> iou_thresholds();

// 1 - lev(p, t) / max(|p|, |t|), 1 when both are empty; 0 below tau.
// Inputs are compared as given (normalize beforehand).
double anls_pair(std::string_view prediction, std::string_view truth, double tau = 0.5);

// Max over truths. NO_ANSWER scores 1 only against an empty or
// "No answer found" truth, else 0.
double anls_question(const std::optional<std::string>& prediction,
                     std::span<const std::string> truths, const AnlsOptions& options = {});

// Single-class AP with greedy per-question matching and all-point
// interpolation. Positives are all gt boxes; predictions without a box are not
// detections. Throws ConsistencyError for an unknown question_id.
double average_precision(std::span<const Prediction> predictions,
                         std::span<const QaGroundTruth> truths, double iou_threshold);

struct MapResult {
  double map_50_95 = 0.0;
  std::vector<std::pair<double, double>> per_threshold_ap;  // (threshold, AP)
};

MapResult map_iou_sweep(std::span<const Prediction> predictions,
                        std::span<const QaGroundTruth> truths);

struct QuestionScore {
  std::string question_id;
  double anls = 0.0;
  std::optional<double> matched_iou;
};

struct EvalReport {
  std::vector<QuestionScore> per_question;
  double anls_mean = 0.0;                 // x100
  std::optional<double> map_50_95;        // x100, absent without gt boxes
  std::vector<std::pair<double, std::optional<double>>> per_threshold_ap;  // AP x100
};

// Throws ConsistencyError on duplicate or unknown predictions.
EvalReport build_report(std::span<const Prediction> predictions,
                        std::span<const QaGroundTruth> truths, const AnlsOptions& options = {});

Json report_to_json(const EvalReport& report, std::string_view dataset, std::string_view run_label);

struct ReportRow {
  std::string label;
  const EvalReport* report = nullptr;
};

// Aligned text table: one row per run, an ANLS column and, when any row has
// boxes, an mAP@IoU column.
std::string render_table(std::string_view dataset, std::span<const ReportRow> rows);

}  // namespace docground
