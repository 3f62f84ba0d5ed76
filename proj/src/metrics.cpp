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

#include "docground/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "docground/document.hpp"
#include "docground/error.hpp"
#include "docground/text.hpp"

namespace docground {

std::array<double, 10> iou_thresholds() {
  std::array<double, 10> t{};
  for (int i = 0; i < 10; ++i) t[static_cast<std::size_t>(i)] = (50 + 5 * i) / 100.0;
  return t;
}

double anls_pair(std::string_view prediction, std::string_view truth, double tau) {
  const std::u32string p = to_code_points(prediction);
  const std::u32string t = to_code_points(truth);
  const std::size_t longest = std::max(p.size(), t.size());
  if (longest == 0) return 1.0;
  const double s =
      1.0 - static_cast<double>(levenshtein(p, t)) / static_cast<double>(longest);
  return s >= tau ? s : 0.0;
}

double anls_question(const std::optional<std::string>& prediction,
                     std::span<const std::string> truths, const AnlsOptions& options) {
  auto prep = [&](std::string_view s) {
    return options.normalize ? normalize_for_match(s) : std::string(s);
  };
  if (!prediction) {
    const std::string sentinel = prep(kNoAnswerSentinel);
    for (const auto& t : truths) {
      const std::string pt = prep(t);
      if (pt.empty() || pt == sentinel) return 1.0;
    }
    return 0.0;
  }
  const std::string p = prep(*prediction);
  double best = 0.0;
  for (const auto& t : truths) best = std::max(best, anls_pair(p, prep(t), options.tau));
  return best;
}

namespace {

std::unordered_map<std::string_view, std::size_t> index_truths(
    std::span<const QaGroundTruth> truths) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (!index.emplace(truths[i].question_id, i).second) {
      throw ConsistencyError("duplicate ground truth for question '" + truths[i].question_id + "'");
    }
  }
  return index;
}

}  // namespace

double average_precision(std::span<const Prediction> predictions,
                         std::span<const QaGroundTruth> truths, double iou_threshold) {
  const auto index = index_truths(truths);
  std::vector<const Prediction*> detections;
  for (const auto& p : predictions) {
    if (index.find(p.question_id) == index.end()) {
      throw ConsistencyError("prediction for unknown question '" + p.question_id + "'");
    }
    if (p.pred_box) detections.push_back(&p);
  }
  std::stable_sort(detections.begin(), detections.end(), [](const Prediction* a, const Prediction* b) {
    if (a->confidence != b->confidence) return a->confidence > b->confidence;
    return a->question_id < b->question_id;
  });

  std::size_t positives = 0;
  std::vector<std::vector<bool>> used(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) {
    positives += truths[i].gt_boxes.size();
    used[i].assign(truths[i].gt_boxes.size(), false);
  }
  if (positives == 0) return 0.0;

  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < detections.size(); ++k) {
    const Prediction& det = *detections[k];
    const std::size_t q = index.at(det.question_id);
    double best_iou = -1.0;
    std::size_t best = 0;
    for (std::size_t g = 0; g < truths[q].gt_boxes.size(); ++g) {
      if (used[q][g]) continue;
      const double iou = bbox_iou(*det.pred_box, truths[q].gt_boxes[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best = g;
      }
    }
    if (best_iou >= iou_threshold) {
      used[q][best] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(positives));
  }

  for (std::size_t k = precision.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

MapResult map_iou_sweep(std::span<const Prediction> predictions,
                        std::span<const QaGroundTruth> truths) {
  MapResult out;
  double sum = 0.0;
  for (double t : iou_thresholds()) {
    const double ap = average_precision(predictions, truths, t);
    out.per_threshold_ap.emplace_back(t, ap);
    sum += ap;
  }
  out.map_50_95 = sum / static_cast<double>(out.per_threshold_ap.size());
  return out;
}

EvalReport build_report(std::span<const Prediction> predictions,
                        std::span<const QaGroundTruth> truths, const AnlsOptions& options) {
  const auto index = index_truths(truths);
  std::vector<const Prediction*> by_truth(truths.size(), nullptr);
  for (const auto& p : predictions) {
    const auto it = index.find(p.question_id);
    if (it == index.end()) {
      throw ConsistencyError("prediction for unknown question '" + p.question_id + "'");
    }
    if (by_truth[it->second]) {
      throw ConsistencyError("duplicate prediction for question '" + p.question_id + "'");
    }
    by_truth[it->second] = &p;
  }

  EvalReport report;
  double total = 0.0;
  bool any_boxes = false;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const QaGroundTruth& truth = truths[i];
    const Prediction* pred = by_truth[i];
    QuestionScore score{truth.question_id, 0.0, std::nullopt};
    score.anls = anls_question(pred ? pred->answer_text : std::nullopt, truth.answers, options);
    if (pred && pred->pred_box && !truth.gt_boxes.empty()) {
      double best = 0.0;
      for (const auto& g : truth.gt_boxes) best = std::max(best, bbox_iou(*pred->pred_box, g));
      score.matched_iou = best;
    }
    any_boxes = any_boxes || !truth.gt_boxes.empty();
    total += score.anls;
    report.per_question.push_back(std::move(score));
  }
  report.anls_mean =
      truths.empty() ? 0.0 : 100.0 * (total / static_cast<double>(truths.size()));

  if (any_boxes) {
    const MapResult map = map_iou_sweep(predictions, truths);
    report.map_50_95 = 100.0 * map.map_50_95;
    for (const auto& [t, ap] : map.per_threshold_ap) report.per_threshold_ap.emplace_back(t, 100.0 * ap);
  } else {
    for (double t : iou_thresholds()) report.per_threshold_ap.emplace_back(t, std::nullopt);
  }
  return report;
}

Json report_to_json(const EvalReport& report, std::string_view dataset, std::string_view run_label) {
  Json per_threshold = Json::array();
  for (const auto& [t, ap] : report.per_threshold_ap) {
    per_threshold.push_back({{"iou", t}, {"ap", ap ? Json(*ap) : Json(nullptr)}});
  }
  Json per_question = Json::array();
  for (const auto& q : report.per_question) {
    per_question.push_back({{"question_id", q.question_id},
                            {"anls", q.anls},
                            {"matched_iou", q.matched_iou ? Json(*q.matched_iou) : Json(nullptr)}});
  }
  return Json{{"schema", "docground.report.v1"},
              {"dataset", dataset},
              {"run", run_label},
              {"n_questions", report.per_question.size()},
              {"anls", report.anls_mean},
              {"map_50_95", report.map_50_95 ? Json(*report.map_50_95) : Json(nullptr)},
              {"per_threshold_ap", std::move(per_threshold)},
              {"per_question", std::move(per_question)}};
}

namespace {

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string render_table(std::string_view dataset, std::span<const ReportRow> rows) {
  const bool with_map = std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) {
    return r.report && r.report->map_50_95.has_value();
  });
  std::vector<std::string> header{"Method", std::string(dataset) + " ANLS"};
  if (with_map) header.push_back(std::string(dataset) + " mAP@IoU");

  std::vector<std::vector<std::string>> body;
  for (const auto& row : rows) {
    std::vector<std::string> cells{row.label, fixed1(row.report->anls_mean)};
    if (with_map) cells.push_back(row.report->map_50_95 ? fixed1(*row.report->map_50_95) : "-");
    body.push_back(std::move(cells));
  }

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& cells : body) width[c] = std::max(width[c], cells[c].size());
  }

  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out << " | ";
      out << (c == 0 ? pad_right(cells[c], width[c]) : pad_left(cells[c], width[c]));
    }
    out << '\n';
  };
  emit(header);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out << "-+-";
    out << std::string(width[c], '-');
  }
  out << '\n';
  for (const auto& cells : body) emit(cells);
  return out.str();
}

}  // namespace docground
