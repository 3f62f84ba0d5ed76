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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docground/dataset.hpp"
#include "docground/metrics.hpp"
#include "docground/planner.hpp"

namespace docground {

struct ServiceEndpoints {
  std::string ocr;
  std::string embed;
  std::string qa;
  std::string plan;
};

struct RunConfig {
  PipelineConfig pipeline;
  std::size_t workers = 1;
  std::optional<std::filesystem::path> trace_path;
  std::optional<std::filesystem::path> overlay_dir;
  ServiceEndpoints endpoints;
  std::optional<std::filesystem::path> replay_dir;
  ReplayMode replay_mode = ReplayMode::Passthrough;
  std::size_t embedding_dim = 384;
  std::uint64_t seed = 7;
  // Set when top_k came from a flag or config file; otherwise eval picks
  // default_top_k(dataset).
  bool top_k_explicit = false;

  void validate() const;
};

// 5 for DocVQA-style bundles, 3 for the entity datasets (funsd, cord, sroie).
std::size_t default_top_k(std::string_view dataset);

// DOCGROUND_{OCR,EMBED,QA,PLAN}_ENDPOINT. `getenv` is injectable for tests.
using EnvLookup = std::function<std::optional<std::string>(const char*)>;
EnvLookup process_env();
void apply_env(RunConfig& config, const EnvLookup& getenv);

// Keys mirror the command-line flags (policy, no_retrieval, top_k, workers,
// seed, ...). Unknown keys raise ConfigError.
void apply_config_json(RunConfig& config, const Json& j);
Json run_config_to_json(const RunConfig& config);

// Remote clients for configured endpoints (or replay store), in-process
// defaults otherwise: hashing embedder and the extractive mock QA.
Services build_services(const RunConfig& config);

// Row label for report tables, e.g. "heuristic agent" or "full pipeline (no retrieval)".
std::string run_label(const RunConfig& config);

struct EpisodeRecord {
  std::string question_id;
  std::string doc_id;
  GroundedAnswer answer;
  std::vector<TraceStep> trace;
  std::optional<std::string> error;
  bool planner_fallback = false;
};

struct EvalRun {
  std::vector<EpisodeRecord> episodes;  // bundle order
  std::vector<Prediction> predictions;
  EvalReport report;
};

// Runs every record with `workers` concurrent episodes. Per-question fatal
// errors become NO_ANSWER predictions carrying the error.
EvalRun evaluate_bundle(const DatasetBundle& bundle, const Services& services,
                        const RunConfig& config);

Json episode_to_json(const EpisodeRecord& episode);

// Command entry points; return the process exit code.
int cmd_ask(const std::filesystem::path& doc_path, const std::string& question,
            const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_eval(const std::filesystem::path& bundle_path, const std::filesystem::path& out_dir,
             const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_overlay(const std::filesystem::path& doc_path, const std::filesystem::path& predictions_path,
                const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);
int cmd_gen_synthetic(const std::filesystem::path& out_dir, std::uint64_t seed, std::size_t n_docs,
                      const SyntheticSpec& spec, std::ostream& out, std::ostream& err);
int cmd_adapt(const std::string& format, const std::vector<std::filesystem::path>& inputs,
              const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

struct OverlayAnswer {
  std::string question_id;
  std::optional<std::string> answer;
  std::vector<BBox> regions;
};

struct Overlay {
  std::string svg;
  Json sidecar;
  std::vector<std::string> warnings;
};

inline constexpr std::array<std::string_view, 10> kOverlayPalette = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

// One rectangle per region in palette[i % 10] for answer i, a dashed union
// rectangle for multi-region answers and the answer text as a label.
// Out-of-page boxes are clamped with a warning.
Overlay render_overlay(const DocumentRecord& doc, std::span<const OverlayAnswer> answers);

}  // namespace docground
