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

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "docground/app.hpp"
#include "docground/error.hpp"

namespace {

using docground::RunConfig;

// Flags shared by ask and eval. Each one overrides the config file only when given.
struct RunFlags {
  std::string policy;
  bool no_retrieval = false;
  bool lookup_only_qa = false;
  std::size_t top_k = 0;
  std::size_t workers = 0;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;
  double confidence_floor = 0.0;
  std::string config_path;
  std::string trace;
  std::string replay_dir;
  std::string replay_mode;

  CLI::Option* o_policy = nullptr;
  CLI::Option* o_no_retrieval = nullptr;
  CLI::Option* o_lookup = nullptr;
  CLI::Option* o_top_k = nullptr;
  CLI::Option* o_workers = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_max_steps = nullptr;
  CLI::Option* o_floor = nullptr;
  CLI::Option* o_trace = nullptr;
  CLI::Option* o_replay_dir = nullptr;
  CLI::Option* o_replay_mode = nullptr;

  void attach(CLI::App* cmd) {
    o_policy = cmd->add_option("--policy", policy, "planner policy")
                   ->check(CLI::IsMember({"llm", "heuristic"}));
    o_no_retrieval = cmd->add_flag("--no-retrieval", no_retrieval, "send all text to QA");
    o_lookup = cmd->add_flag("--lookup-only-qa", lookup_only_qa, "use the extractive lookup QA");
    o_top_k = cmd->add_option("--top-k", top_k, "retrieval depth")->check(CLI::PositiveNumber);
    o_workers = cmd->add_option("--workers", workers, "concurrent episodes")->check(CLI::PositiveNumber);
    o_seed = cmd->add_option("--seed", seed, "seed for synthetic data and backoff");
    o_max_steps = cmd->add_option("--max-steps", max_steps, "planner step budget");
    o_floor = cmd->add_option("--confidence-floor", confidence_floor, "refinement threshold");
    cmd->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    o_trace = cmd->add_option("--trace", trace, "trace JSONL file (ask) or directory (eval)");
    o_replay_dir = cmd->add_option("--replay-dir", replay_dir, "record/replay store");
    o_replay_mode = cmd->add_option("--replay-mode", replay_mode, "record, replay or passthrough")
                        ->check(CLI::IsMember({"record", "replay", "passthrough"}));
  }

  // defaults < environment < config file < flags
  RunConfig resolve() const {
    RunConfig cfg;
    docground::apply_env(cfg, docground::process_env());
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      std::stringstream buf;
      buf << in.rdbuf();
      try {
        docground::apply_config_json(cfg, docground::Json::parse(buf.str()));
      } catch (const docground::Json::exception& e) {
        throw docground::ConfigError(config_path + ": " + e.what());
      }
    }
    auto& p = cfg.pipeline;
    if (o_policy->count()) p.planner.policy = docground::policy_from_string(policy);
    if (o_no_retrieval->count()) p.planner.ablations.no_retrieval = no_retrieval;
    if (o_lookup->count()) p.planner.ablations.lookup_only_qa = lookup_only_qa;
    if (o_top_k->count()) {
      p.retrieval.top_k = top_k;
      cfg.top_k_explicit = true;
    }
    if (o_workers->count()) cfg.workers = workers;
    if (o_seed->count()) cfg.seed = seed;
    if (o_max_steps->count()) p.planner.max_steps = max_steps;
    if (o_floor->count()) p.planner.confidence_floor = confidence_floor;
    if (o_trace->count()) cfg.trace_path = trace;
    if (o_replay_dir->count()) cfg.replay_dir = replay_dir;
    if (o_replay_mode->count()) cfg.replay_mode = docground::replay_mode_from_string(replay_mode);
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grounded question answering over OCR'd documents"};
  app.require_subcommand(1);

  RunFlags ask_flags;
  std::string ask_doc;
  std::string ask_question;
  auto* ask = app.add_subcommand("ask", "answer one question about a document");
  ask->add_option("doc", ask_doc, "OCR JSON file or image")->required();
  ask->add_option("question", ask_question, "question text")->required();
  ask_flags.attach(ask);

  RunFlags eval_flags;
  std::string eval_bundle;
  std::string eval_out = "eval_out";
  auto* eval = app.add_subcommand("eval", "evaluate a dataset bundle");
  eval->add_option("bundle", eval_bundle, "bundle directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", eval_out, "output directory");
  eval_flags.attach(eval);

  std::string ov_doc;
  std::string ov_predictions;
  std::string ov_out = "overlays";
  auto* overlay = app.add_subcommand("overlay", "draw predicted answer boxes as SVG");
  overlay->add_option("doc", ov_doc, "OCR JSON file")->required();
  overlay->add_option("predictions", ov_predictions, "predictions JSONL")->required();
  overlay->add_option("--out", ov_out, "output directory");

  std::string gen_out;
  std::uint64_t gen_seed = 7;
  std::size_t gen_docs = 25;
  docground::SyntheticSpec gen_spec;
  bool gen_heavy = false;
  std::size_t gen_items = 0;
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic receipts/forms bundle");
  gen->add_option("out", gen_out, "bundle directory")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--docs", gen_docs, "number of documents");
  gen->add_option("--noise", gen_spec.noise_rate, "per-character OCR noise rate")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--receipt-fraction", gen_spec.receipt_fraction, "share of receipts")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--items", gen_items, "exact number of line items per receipt");
  gen->add_flag("--distractor-heavy", gen_heavy, "20 keyword-overlapping distractors per document");

  std::string adapt_format;
  std::string adapt_out;
  std::vector<std::string> adapt_inputs;
  auto* adapt = app.add_subcommand("adapt", "convert DocVQA/FUNSD/CORD/SROIE annotations");
  adapt->add_option("format", adapt_format, "docvqa, funsd, cord or sroie")->required();
  adapt->add_option("out", adapt_out, "bundle directory")->required();
  adapt->add_option("inputs", adapt_inputs, "annotation files")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (ask->parsed()) {
      return docground::cmd_ask(ask_doc, ask_question, ask_flags.resolve(), std::cout, std::cerr);
    }
    if (eval->parsed()) {
      return docground::cmd_eval(eval_bundle, eval_out, eval_flags.resolve(), std::cout, std::cerr);
    }
    if (overlay->parsed()) {
      return docground::cmd_overlay(ov_doc, ov_predictions, ov_out, std::cout, std::cerr);
    }
    if (gen->parsed()) {
      if (gen_heavy) {
        const double noise = gen_spec.noise_rate;
        const double fraction = gen_spec.receipt_fraction;
        gen_spec = docground::distractor_heavy_spec();
        gen_spec.noise_rate = noise;
        gen_spec.receipt_fraction = fraction;
      }
      if (gen_items) gen_spec.min_items = gen_spec.max_items = gen_items;
      return docground::cmd_gen_synthetic(gen_out, gen_seed, gen_docs, gen_spec, std::cout, std::cerr);
    }
    if (adapt->parsed()) {
      const std::vector<std::filesystem::path> inputs(adapt_inputs.begin(), adapt_inputs.end());
      return docground::cmd_adapt(adapt_format, inputs, adapt_out, std::cout, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
