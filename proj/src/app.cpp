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

#include "docground/app.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "docground/error.hpp"
#include "docground/ocr.hpp"
#include "docground/text.hpp"

namespace docground {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << bytes;
}

// Shortest fixed form with at most 3 decimals; stable across runs.
std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

template <typename T>
T get_as(const Json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

void RunConfig::validate() const {
  pipeline.validate();
  if (workers == 0) throw ConfigError("workers must be positive");
  if (embedding_dim < 8) throw ConfigError("embedding_dim must be >= 8");
}

std::size_t default_top_k(std::string_view dataset) {
  return dataset == "funsd" || dataset == "cord" || dataset == "sroie" ? 3 : 5;
}

EnvLookup process_env() {
  return [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
}

void apply_env(RunConfig& config, const EnvLookup& getenv) {
  if (auto v = getenv("DOCGROUND_OCR_ENDPOINT")) config.endpoints.ocr = *v;
  if (auto v = getenv("DOCGROUND_EMBED_ENDPOINT")) config.endpoints.embed = *v;
  if (auto v = getenv("DOCGROUND_QA_ENDPOINT")) config.endpoints.qa = *v;
  if (auto v = getenv("DOCGROUND_PLAN_ENDPOINT")) config.endpoints.plan = *v;
}

void apply_config_json(RunConfig& config, const Json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  auto& p = config.pipeline;
  for (const auto& [key, value] : j.items()) {
    if (key == "policy") {
      p.planner.policy = policy_from_string(get_as<std::string>(value, key));
    } else if (key == "no_retrieval") {
      p.planner.ablations.no_retrieval = get_as<bool>(value, key);
    } else if (key == "lookup_only_qa") {
      p.planner.ablations.lookup_only_qa = get_as<bool>(value, key);
    } else if (key == "top_k") {
      p.retrieval.top_k = get_as<std::size_t>(value, key);
      config.top_k_explicit = true;
    } else if (key == "semantic_cutoff") {
      p.retrieval.semantic_cutoff = get_as<double>(value, key);
    } else if (key == "min_keyword_matches") {
      p.retrieval.min_keyword_matches = get_as<std::size_t>(value, key);
    } else if (key == "workers") {
      config.workers = get_as<std::size_t>(value, key);
    } else if (key == "seed") {
      config.seed = get_as<std::uint64_t>(value, key);
    } else if (key == "max_steps") {
      p.planner.max_steps = get_as<std::size_t>(value, key);
    } else if (key == "confidence_floor") {
      p.planner.confidence_floor = get_as<double>(value, key);
    } else if (key == "max_refinements") {
      p.planner.max_refinements = get_as<std::size_t>(value, key);
    } else if (key == "planner_temperature") {
      p.planner.temperature = get_as<double>(value, key);
    } else if (key == "max_rationale_tokens") {
      p.planner.max_rationale_tokens = get_as<std::size_t>(value, key);
    } else if (key == "expand_context_to_lines") {
      p.planner.expand_context_to_lines = get_as<bool>(value, key);
    } else if (key == "repair_numeric_answers") {
      p.planner.repair_numeric_answers = get_as<bool>(value, key);
    } else if (key == "qa_temperature") {
      p.qa.temperature = get_as<double>(value, key);
    } else if (key == "max_answer_tokens") {
      p.qa.max_answer_tokens = get_as<std::size_t>(value, key);
    } else if (key == "include_boxes") {
      p.qa.include_boxes = get_as<bool>(value, key);
    } else if (key == "max_fuzzy_distance") {
      p.grounding.max_fuzzy_distance = get_as<std::size_t>(value, key);
    } else if (key == "semantic_threshold") {
      p.grounding.semantic_threshold = get_as<double>(value, key);
    } else if (key == "max_window") {
      p.grounding.max_window = get_as<std::size_t>(value, key);
    } else if (key == "embedding_dim") {
      config.embedding_dim = get_as<std::size_t>(value, key);
    } else if (key == "trace") {
      config.trace_path = get_as<std::string>(value, key);
    } else if (key == "overlay_dir") {
      config.overlay_dir = get_as<std::string>(value, key);
    } else if (key == "replay_dir") {
      config.replay_dir = get_as<std::string>(value, key);
    } else if (key == "replay_mode") {
      config.replay_mode = replay_mode_from_string(get_as<std::string>(value, key));
    } else if (key == "endpoints") {
      if (!value.is_object()) throw ConfigError("config key 'endpoints' must be an object");
      for (const auto& [name, url] : value.items()) {
        const std::string u = get_as<std::string>(url, "endpoints." + name);
        if (name == "ocr") config.endpoints.ocr = u;
        else if (name == "embed") config.endpoints.embed = u;
        else if (name == "qa") config.endpoints.qa = u;
        else if (name == "plan") config.endpoints.plan = u;
        else throw ConfigError("unknown endpoint '" + name + "'");
      }
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

Json run_config_to_json(const RunConfig& config) {
  const auto& p = config.pipeline;
  Json j{{"policy", to_string(p.planner.policy)},
              {"no_retrieval", p.planner.ablations.no_retrieval},
              {"lookup_only_qa", p.planner.ablations.lookup_only_qa},
              {"top_k", p.retrieval.top_k},
              {"semantic_cutoff", p.retrieval.semantic_cutoff},
              {"min_keyword_matches", p.retrieval.min_keyword_matches},
              {"max_steps", p.planner.max_steps},
              {"confidence_floor", p.planner.confidence_floor},
              {"max_refinements", p.planner.max_refinements},
              {"planner_temperature", p.planner.temperature},
              {"max_rationale_tokens", p.planner.max_rationale_tokens},
              {"expand_context_to_lines", p.planner.expand_context_to_lines},
              {"repair_numeric_answers", p.planner.repair_numeric_answers},
              {"qa_temperature", p.qa.temperature},
              {"max_answer_tokens", p.qa.max_answer_tokens},
              {"include_boxes", p.qa.include_boxes},
              {"max_fuzzy_distance", p.grounding.max_fuzzy_distance},
              {"semantic_threshold", p.grounding.semantic_threshold},
              {"max_window", p.grounding.max_window},
              {"embedding_dim", config.embedding_dim},
              {"workers", config.workers},
              {"seed", config.seed}};
  if (config.trace_path) j["trace"] = config.trace_path->string();
  if (config.overlay_dir) j["overlay_dir"] = config.overlay_dir->string();
  if (config.replay_dir) j["replay_dir"] = config.replay_dir->string();
  j["replay_mode"] = config.replay_mode == ReplayMode::Record   ? "record"
                     : config.replay_mode == ReplayMode::Replay ? "replay"
                                                                : "passthrough";
  j["endpoints"] = Json{{"ocr", config.endpoints.ocr},
                        {"embed", config.endpoints.embed},
                        {"qa", config.endpoints.qa},
                        {"plan", config.endpoints.plan}};
  return j;
}

Services build_services(const RunConfig& config) {
  auto remote = [&](const std::string& endpoint) -> std::shared_ptr<ServiceClient> {
    std::shared_ptr<ServiceClient> inner;
    if (!endpoint.empty()) {
      ClientConfig cc;
      cc.endpoint = endpoint;
      inner = std::make_shared<RetryingClient>(std::make_shared<HttpTransport>(cc), cc.retry);
    }
    if (config.replay_dir && config.replay_mode != ReplayMode::Passthrough) {
      if (!inner && config.replay_mode == ReplayMode::Record) return nullptr;
      return record_replay_wrapper(inner, config.replay_mode, *config.replay_dir);
    }
    return inner;
  };

  Services s;
  if (auto c = remote(config.endpoints.ocr)) s.ocr = std::make_shared<RemoteOcrClient>(c);
  if (auto c = remote(config.endpoints.embed)) {
    s.embedder = std::make_shared<CachingEmbeddingProvider>(
        std::make_shared<RemoteEmbeddingProvider>(c, config.embedding_dim));
  } else {
    s.embedder = deterministic_embedder(config.embedding_dim);
  }
  if (auto c = remote(config.endpoints.qa)) {
    s.qa = std::make_shared<RemoteQaBackend>(c);
  } else {
    s.qa = mock_extractive_qa();
  }
  if (auto c = remote(config.endpoints.plan)) s.planner = std::make_shared<RemotePlannerClient>(c);
  return s;
}

std::string run_label(const RunConfig& config) {
  const auto& planner = config.pipeline.planner;
  std::string label = planner.policy == PolicyKind::Llm ? "full pipeline" : "heuristic agent";
  std::vector<std::string> notes;
  if (planner.ablations.no_retrieval) notes.emplace_back("no retrieval");
  if (planner.ablations.lookup_only_qa) notes.emplace_back("lookup-only QA");
  if (!notes.empty()) {
    label += " (";
    for (std::size_t i = 0; i < notes.size(); ++i) label += (i ? ", " : "") + notes[i];
    label += ")";
  }
  return label;
}

EvalRun evaluate_bundle(const DatasetBundle& bundle, const Services& services,
                        const RunConfig& config) {
  config.validate();
  EvalRun run;
  run.episodes.resize(bundle.records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < bundle.records.size(); i = next.fetch_add(1)) {
      const QaRecord& record = bundle.records[i];
      EpisodeRecord& ep = run.episodes[i];
      ep.question_id = record.question.question_id;
      ep.doc_id = record.question.doc_id;
      try {
        EpisodeResult r = run_pipeline(DocumentInput::parsed(bundle.docs.at(record.question.doc_id)),
                                       record.question.text, services, config.pipeline);
        ep.answer = std::move(r.answer);
        ep.trace = std::move(r.trace);
        ep.planner_fallback = r.planner_fallback;
      } catch (const EpisodeError& e) {
        ep.answer = GroundedAnswer::no_answer();
        ep.trace = e.trace();
        ep.error = e.what();
      } catch (const Error& e) {
        ep.answer = GroundedAnswer::no_answer();
        ep.error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::min(config.workers, std::max<std::size_t>(bundle.records.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& ep : run.episodes) {
    run.predictions.push_back({ep.question_id, ep.answer.text, ep.answer.merged_region,
                               ep.answer.confidence});
  }
  run.report = build_report(run.predictions, bundle.truths());
  return run;
}

Json episode_to_json(const EpisodeRecord& episode) {
  Json j = grounded_answer_to_json(episode.answer);
  j["question_id"] = episode.question_id;
  j["doc_id"] = episode.doc_id;
  j["steps"] = episode.trace.size();
  j["planner_fallback"] = episode.planner_fallback;
  j["error"] = episode.error ? Json(*episode.error) : Json(nullptr);
  return j;
}

namespace {

void write_trace(const fs::path& path, std::span<const TraceStep> trace) {
  write_text(path, trace_to_jsonl(trace));
}

DocumentInput load_input(const fs::path& doc_path, const RunConfig& config) {
  if (doc_path.extension() == ".json") {
    return DocumentInput::parsed(parse_ocr_json(read_text(doc_path), config.pipeline.layout));
  }
  if (!fs::exists(doc_path)) throw Error("no such file: " + doc_path.string());
  return DocumentInput::image(doc_path.string());
}

}  // namespace

int cmd_ask(const fs::path& doc_path, const std::string& question, const RunConfig& config,
            std::ostream& out, std::ostream& err) {
  const fs::path trace_path = config.trace_path.value_or("trace.jsonl");
  try {
    config.validate();
    const DocumentInput input = load_input(doc_path, config);
    const Services services = build_services(config);
    const EpisodeResult r = run_pipeline(input, question, services, config.pipeline);
    write_trace(trace_path, r.trace);
    for (const auto& w : r.warnings) err << "warning: " << w << '\n';
    const GroundedAnswer& a = r.answer;
    out << "answer: " << a.display_text() << '\n';
    if (a.merged_region) {
      const BBox& b = *a.merged_region;
      out << "region: [" << num(b.x_min) << ", " << num(b.y_min) << ", " << num(b.x_max) << ", "
          << num(b.y_max) << "]\n";
    } else {
      out << "region: none\n";
    }
    out << "method: " << to_string(a.method) << '\n';
    char conf[32];
    std::snprintf(conf, sizeof conf, "%.3f", a.confidence);
    out << "confidence: " << conf << '\n';
    out << "trace: " << trace_path.string() << '\n';
    return 0;
  } catch (const EpisodeError& e) {
    try {
      write_trace(trace_path, e.trace());
    } catch (const Error&) {
    }
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_eval(const fs::path& bundle_path, const fs::path& out_dir, const RunConfig& config,
             std::ostream& out, std::ostream& err) {
  try {
    config.validate();
    const DatasetBundle bundle = load_bundle(bundle_path);
    RunConfig effective = config;
    if (!effective.top_k_explicit) effective.pipeline.retrieval.top_k = default_top_k(bundle.name);
    const Services services = build_services(effective);
    const EvalRun run = evaluate_bundle(bundle, services, effective);
    const std::string label = run_label(effective);

    fs::create_directories(out_dir);
    write_text(out_dir / "report.json", report_to_json(run.report, bundle.name, label).dump(2) + "\n");
    const std::vector<ReportRow> rows{{label, &run.report}};
    const std::string table = render_table(bundle.name, rows);
    write_text(out_dir / "report.txt", table);
    std::string predictions;
    std::size_t errors = 0;
    for (const auto& ep : run.episodes) {
      predictions += episode_to_json(ep).dump() + "\n";
      if (ep.error) {
        ++errors;
        err << "warning: " << ep.question_id << ": " << *ep.error << '\n';
      }
    }
    write_text(out_dir / "predictions.jsonl", predictions);
    if (config.trace_path) {
      for (const auto& ep : run.episodes) {
        write_trace(*config.trace_path / (ep.question_id + ".jsonl"), ep.trace);
      }
    }
    out << table;
    out << run.episodes.size() << " questions, " << errors << " errors; wrote " << out_dir.string()
        << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

Overlay render_overlay(const DocumentRecord& doc, std::span<const OverlayAnswer> answers) {
  Overlay overlay;
  const double w = doc.page_width;
  const double h = doc.page_height;
  auto clamp = [&](const BBox& b, const std::string& qid, bool& clamped) {
    BBox c{std::clamp(b.x_min, 0.0, w), std::clamp(b.y_min, 0.0, h), std::clamp(b.x_max, 0.0, w),
           std::clamp(b.y_max, 0.0, h)};
    if (!(c == b)) {
      clamped = true;
      overlay.warnings.push_back("box " + to_string(b) + " of " + qid + " clamped to the page");
    }
    return c;
  };
  auto rect = [&](std::ostringstream& svg, const BBox& b, std::string_view color, bool dashed) {
    svg << "    <rect x=\"" << num(b.x_min) << "\" y=\"" << num(b.y_min) << "\" width=\""
        << num(b.width()) << "\" height=\"" << num(b.height()) << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" fill=\"white\" stroke=\"#cccccc\"/>\n"
      << "  <g id=\"page-text\" fill=\"#9a9a9a\" font-family=\"sans-serif\">\n";
  for (const auto& s : doc.segments) {
    svg << "    <text x=\"" << num(s.bbox.x_min) << "\" y=\"" << num(s.bbox.y_max - 0.2 * s.bbox.height())
        << "\" font-size=\"" << num(0.8 * s.bbox.height()) << "\">" << xml_escape(s.text) << "</text>\n";
  }
  svg << "  </g>\n";

  Json items = Json::array();
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const OverlayAnswer& a = answers[i];
    const std::string_view color = kOverlayPalette[i % kOverlayPalette.size()];
    bool clamped = false;
    std::vector<BBox> regions;
    for (const auto& r : a.regions) regions.push_back(clamp(r, a.question_id, clamped));
    std::optional<BBox> merged;
    if (!regions.empty()) merged = bbox_union(regions);

    svg << "  <g id=\"answer-" << i << "\" data-question=\"" << xml_escape(a.question_id) << "\">\n";
    for (const auto& r : regions) rect(svg, r, color, false);
    if (regions.size() > 1) rect(svg, *merged, color, true);
    if (merged) {
      svg << "    <text x=\"" << num(merged->x_min) << "\" y=\"" << num(std::max(12.0, merged->y_min - 4.0))
          << "\" fill=\"" << color << "\" font-size=\"12\" font-family=\"sans-serif\">"
          << xml_escape(a.answer.value_or(std::string(kNoAnswerSentinel))) << "</text>\n";
    }
    svg << "  </g>\n";

    Json boxes = Json::array();
    for (const auto& r : regions) boxes.push_back(box_to_json(r));
    items.push_back({{"question_id", a.question_id},
                     {"answer", a.answer ? Json(*a.answer) : Json(nullptr)},
                     {"color", color},
                     {"regions", std::move(boxes)},
                     {"union", regions.size() > 1 ? box_to_json(*merged) : Json(nullptr)},
                     {"clamped", clamped}});
  }
  svg << "</svg>\n";
  overlay.svg = svg.str();
  overlay.sidecar = Json{{"doc_id", doc.doc_id},
                         {"page_width", w},
                         {"page_height", h},
                         {"palette", kOverlayPalette},
                         {"answers", std::move(items)}};
  return overlay;
}

int cmd_overlay(const fs::path& doc_path, const fs::path& predictions_path, const fs::path& out_dir,
                std::ostream& out, std::ostream& err) {
  try {
    const DocumentRecord doc = parse_ocr_json(read_text(doc_path));
    std::vector<OverlayAnswer> answers;
    std::istringstream lines(read_text(predictions_path));
    std::string line;
    for (std::size_t n = 1; std::getline(lines, line); ++n) {
      if (trim(line).empty()) continue;
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::exception& e) {
        throw ParseError(predictions_path.string() + ":" + std::to_string(n) + ": " + e.what());
      }
      if (j.contains("doc_id") && j["doc_id"].is_string() && j["doc_id"].get<std::string>() != doc.doc_id) {
        continue;
      }
      OverlayAnswer a;
      a.question_id = j.value("question_id", "q" + std::to_string(n));
      if (j.contains("answer") && j["answer"].is_string()) a.answer = j["answer"].get<std::string>();
      if (j.contains("regions") && j["regions"].is_array()) {
        for (const auto& b : j["regions"]) a.regions.push_back(box_from_json(b));
      }
      answers.push_back(std::move(a));
    }
    const Overlay overlay = render_overlay(doc, answers);
    for (const auto& w : overlay.warnings) err << "warning: " << w << '\n';
    fs::create_directories(out_dir);
    write_text(out_dir / (doc.doc_id + ".svg"), overlay.svg);
    write_text(out_dir / (doc.doc_id + ".overlay.json"), overlay.sidecar.dump(2) + "\n");
    out << "wrote " << (out_dir / (doc.doc_id + ".svg")).string() << " (" << answers.size()
        << " answers)\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_gen_synthetic(const fs::path& out_dir, std::uint64_t seed, std::size_t n_docs,
                      const SyntheticSpec& spec, std::ostream& out, std::ostream& err) {
  try {
    const DatasetBundle bundle = generate_synthetic(seed, n_docs, spec);
    save_bundle(bundle, out_dir);
    out << "wrote " << bundle.docs.size() << " documents and " << bundle.records.size()
        << " questions to " << out_dir.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_adapt(const std::string& format, const std::vector<fs::path>& inputs, const fs::path& out_dir,
              std::ostream& out, std::ostream& err) {
  try {
    const DatasetBundle bundle = adapt_external(external_format_from_string(format), inputs);
    save_bundle(bundle, out_dir);
    out << "wrote " << bundle.docs.size() << " documents and " << bundle.records.size()
        << " questions to " << out_dir.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace docground
