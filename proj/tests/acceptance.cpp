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

// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "docground/app.hpp"
#include "docground/dataset.hpp"
#include "docground/grounding.hpp"
#include "docground/metrics.hpp"
#include "docground/planner.hpp"
#include "oracles.hpp"

using namespace docground;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Check {
  bool ok = true;
  std::string why;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      why = what;
    }
  }
};

RunConfig hermetic_config() {
  RunConfig cfg;
  cfg.seed = 7;
  return cfg;
}

EvalRun evaluate(const DatasetBundle& bundle, RunConfig cfg) {
  return evaluate_bundle(bundle, build_services(cfg), cfg);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Check levenshtein_oracle() {
  Check c;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  const std::u32string alphabet = U"abcdé";
  for (int i = 0; i < 500 && c.ok; ++i) {
    std::u32string a, b;
    for (std::size_t k = rng() % 11; k > 0; --k) a += alphabet[rng() % 3];
    for (std::size_t k = rng() % 11; k > 0; --k) b += alphabet[rng() % 3 + 2];
    c.require(levenshtein(a, b) == oracle::edit_distance(a, b), "levenshtein mismatch on pair " + std::to_string(i));
  }
  c.require(anls_pair("receipt", "receipt") == 1.0, "anls receipt");
  c.require(anls_pair("tota1", "total") == 1.0 - 1.0 / 5.0, "anls tota1");
  c.require(anls_pair("yes", "no") == 0.0, "anls yes/no");
  const std::vector<std::string> jan{"january 2020"};
  c.require(anls_question("jan 2020", jan) == 1.0 - 4.0 / 12.0, "anls jan 2020");
  const double secs = seconds_since(t0);
  c.require(secs < 5.0, "runtime " + fmt("%.2f s", secs));
  return c;
}

Check map_oracle() {
  Check c;
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200 && c.ok; ++trial) {
    std::vector<QaGroundTruth> truths;
    const std::size_t nq = 1 + rng() % 4;
    for (std::size_t q = 0; q < nq; ++q) {
      QaGroundTruth t{"q" + std::to_string(q), {"x"}, {}};
      for (std::size_t g = 1 + rng() % 2; g > 0; --g) t.gt_boxes.push_back(oracle::random_int_box(rng, 12));
      truths.push_back(t);
    }
    std::vector<Prediction> preds;
    for (std::size_t k = 1 + rng() % 5; k > 0; --k) {
      preds.push_back({"q" + std::to_string(rng() % nq), "x", oracle::random_int_box(rng, 12),
                       double(rng() % 5) / 5.0});
    }
    const auto sweep = map_iou_sweep(preds, truths);
    c.require(sweep.per_threshold_ap.size() == 10, "threshold count");
    double mean = 0;
    for (std::size_t i = 0; i < sweep.per_threshold_ap.size(); ++i) {
      const double t = 0.5 + 0.05 * double(i);
      const double want = oracle::ap_staircase(preds, truths, t);
      c.require(std::abs(sweep.per_threshold_ap[i].first - t) < 1e-15, "threshold value");
      c.require(std::abs(sweep.per_threshold_ap[i].second - want) <= 1e-12,
                "AP mismatch on instance " + std::to_string(trial));
      mean += sweep.per_threshold_ap[i].second;
    }
    c.require(std::abs(sweep.map_50_95 - mean / 10.0) <= 1e-12, "mAP is not the mean");
  }
  const std::vector<QaGroundTruth> gt{{"q", {"x"}, {{0, 0, 10, 10}}}};
  const std::vector<Prediction> p{{"q", "x", BBox{0, 0, 10, 6}, 1.0}};
  c.require(map_iou_sweep(p, gt).map_50_95 == 0.30, "IoU 0.60 case is not 0.30");
  return c;
}

Check iou_oracle() {
  Check c;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000 && c.ok; ++i) {
    const BBox a = oracle::random_int_box(rng, 50), b = oracle::random_int_box(rng, 50);
    c.require(std::abs(bbox_iou(a, b) - oracle::iou_by_pixels(a, b)) <= 1e-9, "IoU mismatch on pair " + std::to_string(i));
  }
  return c;
}

Check grounding_oracle() {
  Check c;
  std::mt19937_64 rng(4);
  const std::vector<std::string> vocab{"Total", "12.50", "12.5O", "ACME", "Corp", "Tax", "0.80", "Date:",
                                       "01/02/2024", "total 12.50", "Cash", "Corp."};
  const std::vector<std::string> answers{"12.50", "ACME Corp", "total 12.50", "0.8", "Tax 0.80",
                                         "date: 01/02/2024", "acme corp tax", "Cashier", "12.5"};
  auto emb = deterministic_embedder(64);
  GroundingConfig cfg;
  cfg.semantic_threshold = 0.6;
  for (int d = 0; d < 100 && c.ok; ++d) {
    DocumentRecord doc;
    doc.doc_id = "g" + std::to_string(d);
    doc.page_width = doc.page_height = 1000;
    for (std::size_t k = 0, n = 1 + rng() % 8; k < n; ++k) {
      doc.segments.push_back({"s" + std::to_string(k), vocab[rng() % vocab.size()],
                              {10.0 * double(k), 0, 10.0 * double(k) + 8, 10}, 1.0, k});
    }
    std::unordered_set<std::string> ctx;
    for (const auto& s : doc.segments) {
      if (rng() % 3 == 0) ctx.insert(s.id);
    }
    const auto& answer = answers[rng() % answers.size()];
    const auto got = ground_answer(answer, doc, ctx, *emb, cfg);
    const auto want = oracle::grounding_exhaustive(answer, doc, ctx, *emb, cfg);
    const std::string where = " (doc " + std::to_string(d) + ")";
    if (want.tier.empty()) {
      c.require(!got.winner && got.answer.method == GroundingMethod::None, "expected no grounding" + where);
      continue;
    }
    c.require(got.winner.has_value(), "missing winner" + where);
    if (!got.winner) break;
    c.require(to_string(got.winner->tier) == want.tier, "tier" + where);
    c.require(got.winner->start == want.start && got.winner->segment_ids.size() == want.length, "window" + where);
    std::vector<BBox> boxes;
    for (std::size_t i = want.start; i < want.start + want.length; ++i) boxes.push_back(doc.segments[i].bbox);
    c.require(got.answer.regions == boxes, "regions" + where);
  }
  return c;
}

Check end_to_end() {
  Check c;
  const auto t0 = Clock::now();
  const auto bundle = generate_synthetic(7, 25);
  const auto run = evaluate(bundle, hermetic_config());
  const double secs = seconds_since(t0);
  c.require(run.report.anls_mean == 100.0, "anls_mean " + fmt("%.4f", run.report.anls_mean));
  c.require(run.report.map_50_95 && *run.report.map_50_95 == 100.0,
            "mAP " + fmt("%.4f", run.report.map_50_95.value_or(-1)));
  c.require(secs < 30.0, "runtime " + fmt("%.2f s", secs));
  return c;
}

Check noise_degradation() {
  Check c;
  SyntheticSpec spec;
  spec.noise_rate = 0.1;
  const auto bundle = generate_synthetic(7, 25, spec);
  const auto run = evaluate(bundle, hermetic_config());
  c.require(run.report.anls_mean > 0.0 && run.report.anls_mean < 100.0,
            "anls_mean " + fmt("%.4f", run.report.anls_mean));
  std::size_t fuzzy = 0;
  for (const auto& ep : run.episodes) {
    if (ep.answer.method != GroundingMethod::Fuzzy) continue;
    ++fuzzy;
    const double len = double(code_point_length(normalize_for_match(*ep.answer.text)));
    c.require(ep.answer.confidence >= 1.0 - 2.0 / len - 1e-12, "FUZZY confidence below bound for " + ep.question_id);
  }
  c.require(fuzzy > 0, "no FUZZY groundings");
  return c;
}

Check ablation_contracts() {
  Check c;
  const auto bundle = generate_synthetic(7, 25, distractor_heavy_spec());
  RunConfig full = hermetic_config();
  RunConfig ablated = hermetic_config();
  ablated.pipeline.planner.ablations.no_retrieval = true;
  const auto a = evaluate(bundle, full);
  const auto b = evaluate(bundle, ablated);
  for (const auto& ep : b.episodes) {
    for (const auto& s : ep.trace) c.require(s.action.tool != Tool::FindText, "FIND_TEXT in " + ep.question_id);
  }
  c.require(b.report.anls_mean <= a.report.anls_mean,
            "no_retrieval " + fmt("%.2f", b.report.anls_mean) + " > full " + fmt("%.2f", a.report.anls_mean));

  // Scripted LLM planner replaying the heuristic decisions.
  const auto services = build_services(full);
  std::size_t compared = 0;
  for (const auto& rec : generate_synthetic(7, 25).records) {
    if (compared == 40) break;
    const auto& doc = bundle.docs.at(rec.question.doc_id);
    const auto heur = run_pipeline(DocumentInput::parsed(doc), rec.question.text, services, full.pipeline);
    std::vector<std::string> replies;
    for (const auto& s : heur.trace) replies.push_back(format_planner_reply(s.action));
    Services llm_services = services;
    llm_services.planner = std::make_shared<ScriptedPlannerClient>(replies);
    PipelineConfig llm_cfg = full.pipeline;
    llm_cfg.planner.policy = PolicyKind::Llm;
    const auto llm = run_pipeline(DocumentInput::parsed(doc), rec.question.text, llm_services, llm_cfg);
    bool same = llm.trace.size() == heur.trace.size() && !llm.planner_fallback;
    for (std::size_t i = 0; same && i < llm.trace.size(); ++i) {
      Json x = trace_step_to_json(llm.trace[i]), y = trace_step_to_json(heur.trace[i]);
      x.erase("elapsed_ms");
      y.erase("elapsed_ms");
      same = x == y;
    }
    c.require(same, "scripted trace differs for " + rec.question.question_id);
    ++compared;
  }
  return c;
}

Check determinism() {
  Check c;
  const fs::path root = fs::temp_directory_path() / "docground-acceptance-det";
  fs::remove_all(root);
  save_bundle(generate_synthetic(7, 25), root / "bundle");
  std::ostringstream sink;
  RunConfig one = hermetic_config();
  RunConfig eight = hermetic_config();
  eight.workers = 8;
  c.require(cmd_eval(root / "bundle", root / "w1", one, sink, sink) == 0, "eval workers=1 failed");
  c.require(cmd_eval(root / "bundle", root / "w8", eight, sink, sink) == 0, "eval workers=8 failed");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const std::string r1 = slurp(root / "w1" / "report.json");
  c.require(!r1.empty() && r1 == slurp(root / "w8" / "report.json"), "report JSON differs");
  SyntheticSpec noisy;
  noisy.noise_rate = 0.1;
  c.require(generate_synthetic(7, 25) == generate_synthetic(7, 25), "generator not reproducible");
  c.require(generate_synthetic(9, 10, noisy) == generate_synthetic(9, 10, noisy), "noisy generator not reproducible");
  fs::remove_all(root);
  return c;
}

Check compute_path() {
  Check c;
  SyntheticSpec spec;
  spec.receipt_fraction = 1.0;
  spec.min_items = spec.max_items = 5;
  const auto bundle = generate_synthetic(7, 1, spec);
  const QaRecord* rec = nullptr;
  for (const auto& r : bundle.records) {
    if (r.question.text == "What is the sum of all item prices?") rec = &r;
  }
  c.require(rec != nullptr, "no sum question");
  if (!rec) return c;
  const auto& doc = bundle.docs.at(rec->question.doc_id);
  const auto services = build_services(hermetic_config());
  const auto out = run_pipeline(DocumentInput::parsed(doc), rec->question.text, services, {});
  bool routed = false;
  for (const auto& s : out.trace) {
    routed = routed || s.action.tool == Tool::Compute;
    c.require(s.action.tool != Tool::AskQa, "ASK_QA on the compute path");
  }
  c.require(routed, "no COMPUTE step");
  c.require(out.answer.text == rec->truth.answers[0],
            "answer " + out.answer.display_text() + " != " + rec->truth.answers[0]);
  c.require(out.answer.method == GroundingMethod::Operands, "method is not OPERANDS");
  c.require(out.answer.regions.size() == 5, "expected 5 regions, got " + std::to_string(out.answer.regions.size()));
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"metric oracle equivalence", levenshtein_oracle},
      {"mAP protocol equivalence", map_oracle},
      {"geometry oracle", iou_oracle},
      {"grounding brute-force equivalence", grounding_oracle},
      {"end-to-end hermetic pipeline", end_to_end},
      {"noise degradation", noise_degradation},
      {"ablation trace contracts", ablation_contracts},
      {"determinism", determinism},
      {"compute path", compute_path},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.ok = false;
      c.why = std::string("exception: ") + e.what();
    }
    std::printf("%s  %s%s%s\n", c.ok ? "PASS" : "FAIL", name.c_str(), c.ok ? "" : "  -- ", c.why.c_str());
    failed += !c.ok;
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
