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

#include "docground/dataset.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "docground/embedded_data.hpp"
#include "docground/error.hpp"
#include "docground/ocr.hpp"
#include "docground/planner.hpp"
#include "docground/text.hpp"

namespace docground {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << bytes;
  if (!out) throw Error("failed writing " + path.string());
}

Json parse_json_file(const fs::path& path, const std::string& bytes) {
  try {
    return Json::parse(bytes);
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

bool safe_doc_id(std::string_view id) {
  if (id.empty() || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '.' || c == '_' || c == '-';
  });
}

std::string sanitize_id(std::string_view raw) {
  std::string out;
  for (char c : raw) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '-';
    out += ok ? c : '_';
  }
  if (out.empty() || out.front() == '.') out.insert(out.begin(), '_');
  return out;
}

std::string id_string(const Json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw ParseError("id must be a string or an integer");
}

}  // namespace

void DatasetBundle::validate() const {
  std::vector<std::string> missing;
  std::vector<std::string> duplicate;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (docs.find(r.question.doc_id) == docs.end()) {
      missing.push_back(r.question.question_id + " -> " + r.question.doc_id);
    }
    if (!seen.insert(r.question.question_id).second) duplicate.push_back(r.question.question_id);
    if (r.question.question_id != r.truth.question_id) {
      throw ConsistencyError("record '" + r.question.question_id + "' has truth for '" +
                             r.truth.question_id + "'");
    }
    if (r.truth.answers.empty()) {
      throw ConsistencyError("record '" + r.question.question_id + "' has no answers");
    }
    for (const auto& b : r.truth.gt_boxes) {
      if (!b.valid()) {
        throw ConsistencyError("record '" + r.question.question_id + "' has an invalid gt box");
      }
    }
  }
  for (const auto& [id, doc] : docs) {
    if (id != doc.doc_id) {
      throw ConsistencyError("document stored under '" + id + "' has doc_id '" + doc.doc_id + "'");
    }
  }
  auto join = [](const std::vector<std::string>& xs) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  if (!missing.empty()) throw ConsistencyError("questions reference missing documents: " + join(missing));
  if (!duplicate.empty()) throw ConsistencyError("duplicate question ids: " + join(duplicate));
}

std::vector<QaGroundTruth> DatasetBundle::truths() const {
  std::vector<QaGroundTruth> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.truth);
  return out;
}

Json qa_record_to_json(const QaRecord& record) {
  Json boxes = Json::array();
  for (const auto& b : record.truth.gt_boxes) boxes.push_back(box_to_json(b));
  return Json{{"question_id", record.question.question_id},
              {"doc_id", record.question.doc_id},
              {"question", record.question.text},
              {"answers", record.truth.answers},
              {"gt_boxes", std::move(boxes)}};
}

QaRecord qa_record_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("qa record must be an object");
  for (const char* key : {"question_id", "doc_id", "question"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw ParseError(std::string("qa record needs a string '") + key + "'");
    }
  }
  QaRecord r;
  r.question = {j["question_id"].get<std::string>(), j["question"].get<std::string>(),
                j["doc_id"].get<std::string>()};
  r.truth.question_id = r.question.question_id;
  if (!j.contains("answers") || !j["answers"].is_array()) {
    throw ParseError("qa record '" + r.question.question_id + "' needs an 'answers' array");
  }
  for (const auto& a : j["answers"]) {
    if (!a.is_string()) throw ParseError("qa record '" + r.question.question_id + "': answers must be strings");
    r.truth.answers.push_back(a.get<std::string>());
  }
  if (j.contains("gt_boxes") && !j["gt_boxes"].is_null()) {
    if (!j["gt_boxes"].is_array()) {
      throw ParseError("qa record '" + r.question.question_id + "': gt_boxes must be an array");
    }
    for (const auto& b : j["gt_boxes"]) r.truth.gt_boxes.push_back(box_from_json(b));
  }
  return r;
}

DatasetBundle load_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  const Json manifest = parse_json_file(manifest_path, read_file(manifest_path));
  if (!manifest.is_object() || !manifest.contains("docs") || !manifest["docs"].is_array()) {
    throw ParseError(manifest_path.string() + ": manifest needs a 'docs' array");
  }
  DatasetBundle bundle;
  bundle.name = manifest.value("name", std::string{});

  for (const auto& id_json : manifest["docs"]) {
    if (!id_json.is_string() || !safe_doc_id(id_json.get<std::string>())) {
      throw ParseError(manifest_path.string() + ": invalid doc id " + id_json.dump());
    }
    const std::string id = id_json.get<std::string>();
    const fs::path doc_path = dir / "docs" / (id + ".json");
    DocumentRecord doc;
    try {
      doc = parse_ocr_json(read_file(doc_path));
    } catch (const ParseError& e) {
      throw ParseError(doc_path.string() + ": " + e.what());
    }
    if (doc.doc_id != id) {
      throw ConsistencyError(doc_path.string() + ": doc_id '" + doc.doc_id + "' does not match manifest id '" + id + "'");
    }
    bundle.docs.emplace(id, std::move(doc));
  }

  const fs::path qa_path = dir / "qa.jsonl";
  std::istringstream qa(read_file(qa_path));
  std::string line;
  for (std::size_t n = 1; std::getline(qa, line); ++n) {
    if (trim(line).empty()) continue;
    try {
      bundle.records.push_back(qa_record_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw ParseError(qa_path.string() + ":" + std::to_string(n) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(qa_path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }

  const fs::path noise_path = dir / "noise_log.jsonl";
  if (fs::exists(noise_path)) {
    std::istringstream noise(read_file(noise_path));
    for (std::size_t n = 1; std::getline(noise, line); ++n) {
      if (trim(line).empty()) continue;
      try {
        const Json j = Json::parse(line);
        bundle.noise_log.push_back({j.at("doc_id").get<std::string>(), j.at("segment_id").get<std::string>(),
                                    j.at("index").get<std::size_t>(), j.at("original").get<std::string>(),
                                    j.at("replacement").get<std::string>()});
      } catch (const Json::exception& e) {
        throw ParseError(noise_path.string() + ":" + std::to_string(n) + ": " + e.what());
      }
    }
  }

  if (manifest.contains("n_questions") && manifest["n_questions"].is_number_unsigned() &&
      manifest["n_questions"].get<std::size_t>() != bundle.records.size()) {
    throw ConsistencyError(manifest_path.string() + ": n_questions does not match qa.jsonl");
  }
  bundle.validate();
  return bundle;
}

void save_bundle(const DatasetBundle& bundle, const fs::path& dir) {
  bundle.validate();
  fs::create_directories(dir / "docs");
  Json ids = Json::array();
  for (const auto& [id, doc] : bundle.docs) {
    if (!safe_doc_id(id)) throw ConsistencyError("doc id '" + id + "' is not usable as a file name");
    ids.push_back(id);
    write_file(dir / "docs" / (id + ".json"), serialize_ocr_json(doc) + "\n");
  }
  std::string qa;
  for (const auto& r : bundle.records) qa += qa_record_to_json(r).dump() + "\n";
  write_file(dir / "qa.jsonl", qa);
  if (!bundle.noise_log.empty()) {
    std::string noise;
    for (const auto& e : bundle.noise_log) {
      noise += Json{{"doc_id", e.doc_id},
                    {"segment_id", e.segment_id},
                    {"index", e.index},
                    {"original", e.original},
                    {"replacement", e.replacement}}
                   .dump() +
               "\n";
    }
    write_file(dir / "noise_log.jsonl", noise);
  } else {
    fs::remove(dir / "noise_log.jsonl");
  }
  const Json manifest{{"format", "docground-bundle"},
                      {"version", 1},
                      {"name", bundle.name},
                      {"docs", std::move(ids)},
                      {"qa", "qa.jsonl"},
                      {"n_questions", bundle.records.size()}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

ExternalFormat external_format_from_string(std::string_view tag) {
  if (tag == "docvqa") return ExternalFormat::DocVqa;
  if (tag == "funsd") return ExternalFormat::Funsd;
  if (tag == "cord") return ExternalFormat::Cord;
  if (tag == "sroie") return ExternalFormat::Sroie;
  throw ConfigError("unknown dataset format '" + std::string(tag) +
                    "' (expected docvqa, funsd, cord or sroie)");
}

std::string_view to_string(ExternalFormat format) {
  switch (format) {
    case ExternalFormat::DocVqa: return "docvqa";
    case ExternalFormat::Funsd: return "funsd";
    case ExternalFormat::Cord: return "cord";
    case ExternalFormat::Sroie: return "sroie";
  }
  return "docvqa";
}

const Json& qa_templates() {
  static const Json templates = Json::parse(embedded::kQaTemplates);
  return templates;
}

namespace {

std::string fill_template(std::string_view key) {
  std::string t = qa_templates().at("key_value").get<std::string>();
  const auto pos = t.find("{key}");
  if (pos != std::string::npos) t.replace(pos, 5, key);
  return t;
}

BBox polygon_box(const std::vector<double>& xy) {
  BBox b{xy[0], xy[1], xy[0], xy[1]};
  for (std::size_t i = 0; i + 1 < xy.size(); i += 2) {
    b.x_min = std::min(b.x_min, xy[i]);
    b.x_max = std::max(b.x_max, xy[i]);
    b.y_min = std::min(b.y_min, xy[i + 1]);
    b.y_max = std::max(b.y_max, xy[i + 1]);
  }
  return b;
}

BBox clamp_box(BBox b, double w, double h) {
  b.x_min = std::clamp(b.x_min, 0.0, w);
  b.x_max = std::clamp(b.x_max, 0.0, w);
  b.y_min = std::clamp(b.y_min, 0.0, h);
  b.y_max = std::clamp(b.y_max, 0.0, h);
  return b;
}

// Page size from the content extent when the source format has none.
void fit_page(DocumentRecord& doc) {
  for (const auto& s : doc.segments) {
    doc.page_width = std::max(doc.page_width, s.bbox.x_max);
    doc.page_height = std::max(doc.page_height, s.bbox.y_max);
  }
}

void finish_doc(DocumentRecord& doc) {
  doc.segments = assign_reading_order(std::move(doc.segments));
  doc.validate();
}

bool blank(const std::string& bytes) { return trim(bytes).empty(); }

struct AdaptContext {
  DatasetBundle bundle;
  std::size_t next_question = 0;

  void add(const std::string& doc_id, std::string question, std::string answer,
           std::vector<BBox> boxes) {
    QaRecord r;
    r.question = {doc_id + "-q" + std::to_string(next_question++), std::move(question), doc_id};
    r.truth = {r.question.question_id, {std::move(answer)}, std::move(boxes)};
    bundle.records.push_back(std::move(r));
  }
};

void adapt_docvqa(std::span<const fs::path> paths, AdaptContext& ctx) {
  struct QaFile {
    fs::path path;
    Json json;
  };
  std::vector<QaFile> qa_files;
  for (const auto& path : paths) {
    const std::string bytes = read_file(path);
    if (blank(bytes)) continue;
    Json j = parse_json_file(path, bytes);
    if (j.is_object() && j.contains("data")) {
      qa_files.push_back({path, std::move(j)});
      continue;
    }
    if (!j.is_object() || !j.contains("recognitionResults") || !j["recognitionResults"].is_array() ||
        j["recognitionResults"].empty()) {
      throw ParseError(path.string() + ": neither a DocVQA QA file nor an OCR file");
    }
    try {
      const Json& page = j["recognitionResults"][0];
      DocumentRecord doc;
      doc.doc_id = sanitize_id(path.stem().string());
      doc.page_width = page.at("width").get<double>();
      doc.page_height = page.at("height").get<double>();
      std::size_t n = 0;
      for (const auto& line : page.at("lines")) {
        const std::string text = line.at("text").get<std::string>();
        const auto poly = line.at("boundingBox").get<std::vector<double>>();
        if (poly.size() != 8) throw ParseError("line " + std::to_string(n) + ": boundingBox needs 8 numbers");
        if (has_visible_text(text)) {
          doc.segments.push_back({"l" + std::to_string(n), text,
                                  clamp_box(polygon_box(poly), doc.page_width, doc.page_height), 1.0, 0});
        }
        ++n;
      }
      finish_doc(doc);
      ctx.bundle.docs[doc.doc_id] = std::move(doc);
    } catch (const Json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  for (const auto& file : qa_files) {
    const Json& data = file.json["data"];
    if (!data.is_array()) throw ParseError(file.path.string() + ": 'data' must be an array");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Json& item = data[i];
      try {
        if (!item.contains("answers")) continue;  // test split: no truth
        const std::string qid = id_string(item.at("questionId"));
        const std::string doc_id = sanitize_id(fs::path(item.at("image").get<std::string>()).stem().string());
        if (ctx.bundle.docs.find(doc_id) == ctx.bundle.docs.end()) {
          throw ParseError("question " + qid + " references '" + doc_id + "' without an OCR file");
        }
        QaRecord r;
        r.question = {qid, item.at("question").get<std::string>(), doc_id};
        r.truth.question_id = qid;
        r.truth.answers = item.at("answers").get<std::vector<std::string>>();
        if (r.truth.answers.empty()) throw ParseError("question " + qid + " has no answers");
        ctx.bundle.records.push_back(std::move(r));
      } catch (const Json::exception& e) {
        throw ParseError(file.path.string() + ": record " + std::to_string(i) + ": " + e.what());
      } catch (const ParseError& e) {
        throw ParseError(file.path.string() + ": record " + std::to_string(i) + ": " + e.what());
      }
    }
  }
}

void adapt_funsd(const fs::path& path, AdaptContext& ctx) {
  const std::string bytes = read_file(path);
  if (blank(bytes)) return;
  const Json j = parse_json_file(path, bytes);
  std::size_t record = 0;
  try {
    DocumentRecord doc;
    doc.doc_id = sanitize_id(path.stem().string());
    struct Entity {
      std::string text;
      std::string label;
      BBox box;
      std::vector<std::pair<std::string, std::string>> links;
    };
    std::map<std::string, Entity> entities;
    std::vector<std::string> order;
    for (const auto& e : j.at("form")) {
      const std::string id = id_string(e.at("id"));
      const auto box = e.at("box").get<std::vector<double>>();
      if (box.size() != 4) throw ParseError("box needs 4 numbers");
      Entity ent{e.at("text").get<std::string>(), e.value("label", std::string{}),
                 {box[0], box[1], box[2], box[3]}, {}};
      for (const auto& link : e.value("linking", Json::array())) {
        ent.links.emplace_back(id_string(link.at(0)), id_string(link.at(1)));
      }
      if (has_visible_text(ent.text)) doc.segments.push_back({"e" + id, ent.text, ent.box, 1.0, 0});
      order.push_back(id);
      entities.emplace(id, std::move(ent));
      ++record;
    }
    fit_page(doc);
    finish_doc(doc);
    std::set<std::pair<std::string, std::string>> done;
    for (const auto& qid : order) {
      const Entity& q = entities.at(qid);
      if (q.label != "question") continue;
      for (const auto& [from, to] : q.links) {
        if (from != qid || !done.insert({from, to}).second) continue;
        const auto it = entities.find(to);
        if (it == entities.end() || it->second.label != "answer" || !has_visible_text(it->second.text)) continue;
        std::string key(trim(q.text));
        while (!key.empty() && key.back() == ':') key.pop_back();
        ctx.add(doc.doc_id, fill_template(trim(key)), it->second.text, {it->second.box});
      }
    }
    ctx.bundle.docs[doc.doc_id] = std::move(doc);
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": record " + std::to_string(record) + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": record " + std::to_string(record) + ": " + e.what());
  }
}

void adapt_cord(const fs::path& path, AdaptContext& ctx) {
  const std::string bytes = read_file(path);
  if (blank(bytes)) return;
  const Json j = parse_json_file(path, bytes);
  std::size_t record = 0;
  try {
    DocumentRecord doc;
    doc.doc_id = sanitize_id(path.stem().string());
    if (j.contains("meta") && j["meta"].contains("image_size")) {
      doc.page_width = j["meta"]["image_size"].at("width").get<double>();
      doc.page_height = j["meta"]["image_size"].at("height").get<double>();
    }
    struct Line {
      std::string category;
      std::string text;
      std::vector<BBox> boxes;
    };
    std::vector<Line> lines;
    std::map<std::string, int> counts;
    for (const auto& line : j.at("valid_line")) {
      Line l{line.at("category").get<std::string>(), {}, {}};
      std::size_t k = 0;
      for (const auto& w : line.at("words")) {
        const Json& q = w.at("quad");
        const BBox box = polygon_box({q.at("x1").get<double>(), q.at("y1").get<double>(),
                                      q.at("x2").get<double>(), q.at("y2").get<double>(),
                                      q.at("x3").get<double>(), q.at("y3").get<double>(),
                                      q.at("x4").get<double>(), q.at("y4").get<double>()});
        const std::string text = w.at("text").get<std::string>();
        if (!has_visible_text(text)) continue;
        doc.segments.push_back({"w" + std::to_string(record) + "-" + std::to_string(k++), text, box, 1.0, 0});
        if (!l.text.empty()) l.text += ' ';
        l.text += std::string(trim(text));
        l.boxes.push_back(box);
      }
      ++counts[l.category];
      lines.push_back(std::move(l));
      ++record;
    }
    if (doc.page_width <= 0.0 || doc.page_height <= 0.0) {
      fit_page(doc);
    } else {
      for (auto& s : doc.segments) s.bbox = clamp_box(s.bbox, doc.page_width, doc.page_height);
      for (auto& l : lines) {
        for (auto& b : l.boxes) b = clamp_box(b, doc.page_width, doc.page_height);
      }
    }
    finish_doc(doc);
    for (const auto& l : lines) {
      if (counts[l.category] != 1 || l.text.empty()) continue;
      ctx.add(doc.doc_id, fill_template(l.category), l.text, {bbox_union(l.boxes)});
    }
    ctx.bundle.docs[doc.doc_id] = std::move(doc);
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": record " + std::to_string(record) + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": record " + std::to_string(record) + ": " + e.what());
  }
}

DocumentRecord parse_sroie_ocr(const fs::path& path, const std::string& bytes) {
  DocumentRecord doc;
  doc.doc_id = sanitize_id(path.stem().string());
  std::istringstream in(bytes);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<double> xy;
    std::size_t pos = 0;
    for (int k = 0; k < 8; ++k) {
      const auto comma = line.find(',', pos);
      if (comma == std::string::npos) throw ParseError(path.string() + ": line " + std::to_string(n) + ": expected 8 coordinates");
      try {
        xy.push_back(std::stod(line.substr(pos, comma - pos)));
      } catch (const std::exception&) {
        throw ParseError(path.string() + ": line " + std::to_string(n) + ": bad coordinate");
      }
      pos = comma + 1;
    }
    const std::string text = line.substr(pos);
    if (!has_visible_text(text)) continue;
    doc.segments.push_back({"l" + std::to_string(n), text, polygon_box(xy), 1.0, 0});
  }
  fit_page(doc);
  finish_doc(doc);
  return doc;
}

std::vector<BBox> sroie_value_boxes(const DocumentRecord& doc, std::string_view value) {
  const std::string v = normalize_for_match(value);
  std::vector<BBox> exact;
  std::vector<BBox> parts;
  std::vector<BBox> holders;
  for (const auto& s : doc.segments) {
    const std::string t = normalize_for_match(s.text);
    if (t.empty()) continue;
    if (t == v) {
      exact.push_back(s.bbox);
    } else if (v.find(t) != std::string::npos) {
      parts.push_back(s.bbox);
    } else {
      for (std::size_t p = t.find(v); p != std::string::npos; p = t.find(v, p + 1)) {
        const bool left = p == 0 || t[p - 1] == ' ' || t[p - 1] == ':';
        const bool right = p + v.size() == t.size() || t[p + v.size()] == ' ';
        if (left && right) {
          holders.push_back(s.bbox);
          break;
        }
      }
    }
  }
  const auto& pick = !exact.empty() ? exact : !parts.empty() ? parts : holders;
  if (pick.empty()) return {};
  return {bbox_union(pick)};
}

void adapt_sroie(std::span<const fs::path> paths, AdaptContext& ctx) {
  std::map<std::string, fs::path> ocr_files;
  std::map<std::string, fs::path> key_files;
  std::vector<std::string> stems;
  for (const auto& path : paths) {
    const std::string stem = path.stem().string();
    if (path.extension() == ".txt") {
      ocr_files[stem] = path;
    } else {
      key_files[stem] = path;
    }
    if (std::find(stems.begin(), stems.end(), stem) == stems.end()) stems.push_back(stem);
  }
  const Json& templates = qa_templates().at("sroie");
  for (const auto& stem : stems) {
    const auto ocr_it = ocr_files.find(stem);
    const auto key_it = key_files.find(stem);
    if (ocr_it == ocr_files.end() || key_it == key_files.end()) {
      throw ParseError("sroie document '" + stem + "' needs both a .txt OCR file and a .json key file");
    }
    const std::string ocr_bytes = read_file(ocr_it->second);
    const std::string key_bytes = read_file(key_it->second);
    if (blank(ocr_bytes) && blank(key_bytes)) continue;
    DocumentRecord doc = parse_sroie_ocr(ocr_it->second, ocr_bytes);
    const Json keys = blank(key_bytes) ? Json::object() : parse_json_file(key_it->second, key_bytes);
    if (!keys.is_object()) throw ParseError(key_it->second.string() + ": key file must be an object");
    for (const auto& [key, value] : keys.items()) {
      if (!value.is_string()) throw ParseError(key_it->second.string() + ": record '" + key + "' is not a string");
      const std::string text = value.get<std::string>();
      if (!has_visible_text(text)) continue;
      const std::string question =
          templates.contains(key) ? templates[key].get<std::string>() : fill_template(key);
      ctx.add(doc.doc_id, question, text, sroie_value_boxes(doc, text));
    }
    ctx.bundle.docs[doc.doc_id] = std::move(doc);
  }
}

}  // namespace

DatasetBundle adapt_external(ExternalFormat format, std::span<const fs::path> paths) {
  AdaptContext ctx;
  ctx.bundle.name = std::string(to_string(format));
  switch (format) {
    case ExternalFormat::DocVqa:
      adapt_docvqa(paths, ctx);
      break;
    case ExternalFormat::Funsd:
      for (const auto& p : paths) adapt_funsd(p, ctx);
      break;
    case ExternalFormat::Cord:
      for (const auto& p : paths) adapt_cord(p, ctx);
      break;
    case ExternalFormat::Sroie:
      adapt_sroie(paths, ctx);
      break;
  }
  ctx.bundle.validate();
  return std::move(ctx.bundle);
}

// ---------------------------------------------------------------------------
// Synthetic corpus

void SyntheticSpec::validate() const {
  if (!(receipt_fraction >= 0.0 && receipt_fraction <= 1.0)) {
    throw ConfigError("receipt_fraction must lie in [0, 1]");
  }
  if (min_items == 0 || min_items > max_items || max_items > 12) {
    throw ConfigError("line items need 1 <= min_items <= max_items <= 12");
  }
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ConfigError("noise_rate must lie in [0, 1]");
}

SyntheticSpec distractor_heavy_spec() {
  SyntheticSpec spec;
  spec.distractors = 20;
  spec.keyword_distractors = true;
  return spec;
}

namespace {

// Bounded draws are done here rather than with std distributions, whose output
// differs between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    std::uint64_t x = engine_();
    while (x < threshold) x = engine_();
    return x % n;
  }

  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  template <typename T, std::size_t N>
  const T& pick(const std::array<T, N>& xs) {
    return xs[below(N)];
  }

 private:
  std::mt19937_64 engine_;
};

constexpr double kCharWidth = 10.0;
constexpr double kLineHeight = 20.0;
constexpr double kLinePitch = 30.0;
constexpr double kMargin = 40.0;

constexpr std::array<std::string_view, 6> kStores = {
    "Blue Harbor Market", "Corner Pantry", "Green Leaf Grocer",
    "Maple Street Deli",  "Sunrise Bakery", "Riverside Foods"};
constexpr std::array<std::string_view, 15> kItems = {
    "Coffee Beans", "Whole Milk",    "Sourdough Bread", "Olive Oil",      "Green Apples",
    "Cheddar Cheese", "Pasta Shells", "Tomato Sauce",   "Brown Rice",     "Orange Juice",
    "Greek Yogurt", "Dark Chocolate", "Peanut Butter",  "Baby Spinach",   "Free Range Eggs"};
constexpr std::array<std::string_view, 10> kFirstNames = {
    "Maria", "James", "Aisha", "Kenji", "Sofia", "Liam", "Priya", "Mateo", "Elena", "Noah"};
constexpr std::array<std::string_view, 10> kLastNames = {
    "Lopez", "Okafor", "Tanaka", "Novak", "Haddad", "Silva", "Reyes", "Larsen", "Kowalski", "Bauer"};
constexpr std::array<std::string_view, 6> kDepartments = {
    "Finance", "Engineering", "Marketing", "Operations", "Human Resources", "Legal"};
constexpr std::array<std::string_view, 3> kFormTitles = {
    "New Hire Information Form", "Staff Record Card", "Personnel Details Form"};
constexpr std::array<std::string_view, 4> kPlainDistractors = {
    "Thank you for shopping with us", "Please keep this copy for your records",
    "Have a great day", "Visit us again soon"};
constexpr std::array<std::string_view, 4> kPlainFormDistractors = {
    "Please print clearly in ink", "For office use only", "Return to the front desk",
    "Retain a copy for your files"};
constexpr std::array<std::string_view, 5> kReceiptKeywords = {"Total", "Tax", "Date", "Cashier",
                                                              "Receipt Number"};
constexpr std::array<std::string_view, 5> kFormKeywords = {"Name", "Employee ID", "Department",
                                                           "Phone Number", "Start Date"};
constexpr std::array<std::string_view, 8> kDistractorTails = {
    "rewards program details",   "policy updated this season", "questions welcome anytime",
    "printed on recycled paper", "support line open daily",    "information available online",
    "review scheduled soon",     "guidelines posted nearby"};

std::string cents(long long c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", c / 100, c % 100);
  return buf;
}

std::string two_digits(std::uint64_t v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02u", static_cast<unsigned>(v));
  return buf;
}

struct PageBuilder {
  DocumentRecord doc;
  double right = 0.0;
  double y = kMargin;

  PageBuilder(std::string doc_id, double width) : right(width - kMargin) {
    doc.doc_id = std::move(doc_id);
    doc.page_width = width;
  }

  BBox place(double x, std::string_view text) const {
    return {x, y, x + kCharWidth * static_cast<double>(code_point_length(text)), y + kLineHeight};
  }

  const TextSegment& add(double x, std::string_view text) {
    TextSegment s;
    s.id = "s" + std::to_string(doc.segments.size());
    s.text = std::string(text);
    s.bbox = place(x, text);
    s.order_index = doc.segments.size();
    doc.segments.push_back(std::move(s));
    return doc.segments.back();
  }

  double right_x(std::string_view text) const {
    return right - kCharWidth * static_cast<double>(code_point_length(text));
  }

  void next_line() { y += kLinePitch; }

  DocumentRecord finish() {
    doc.page_height = y + kMargin;
    return std::move(doc);
  }
};

struct Field {
  std::string label;
  std::string value;
  std::string question;
};

struct Built {
  DocumentRecord doc;
  std::vector<QaRecord> records;
};

// Writes a labeled field as label + value segments, or as one "Label: value"
// segment. Returns the box that holds the value.
BBox add_field(PageBuilder& page, Rng& rng, const Field& f, double value_x, bool right_aligned) {
  BBox box;
  if (rng.below(4) == 0) {
    box = page.add(kMargin, f.label + ": " + f.value).bbox;
  } else {
    page.add(kMargin, f.label);
    box = page.add(right_aligned ? page.right_x(f.value) : value_x, f.value).bbox;
  }
  page.next_line();
  return box;
}

void add_keyword_distractors(PageBuilder& page, Rng& rng, std::span<const std::string_view> keywords,
                             std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::string_view k = keywords[rng.below(keywords.size())];
    page.add(kMargin, std::string(k) + " " + std::string(rng.pick(kDistractorTails)));
    page.next_line();
  }
}

void add_plain_distractors(PageBuilder& page, std::span<const std::string_view> pool, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    page.add(kMargin, pool[i % pool.size()]);
    page.next_line();
  }
}

QaRecord make_record(const std::string& doc_id, std::size_t k, std::string question,
                     std::string answer, std::vector<BBox> boxes) {
  QaRecord r;
  r.question = {doc_id + "-q" + std::to_string(k), std::move(question), doc_id};
  r.truth = {r.question.question_id, {std::move(answer)}, std::move(boxes)};
  return r;
}

Built make_receipt(Rng& rng, const std::string& doc_id, const SyntheticSpec& spec) {
  const std::size_t n_items = spec.min_items + rng.below(spec.max_items - spec.min_items + 1);
  std::vector<std::string_view> names;
  while (names.size() < n_items) {
    const auto name = rng.pick(kItems);
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  }
  // Every numeric string on the page is unique so text answers ground unambiguously.
  std::vector<long long> prices;
  long long subtotal = 0;
  long long tax = 0;
  while (true) {
    prices.clear();
    std::set<std::string> seen;
    subtotal = 0;
    for (std::size_t i = 0; i < n_items; ++i) {
      prices.push_back(100 + static_cast<long long>(rng.below(4900)));
      subtotal += prices.back();
      seen.insert(cents(prices.back()));
    }
    tax = (subtotal * 8 + 50) / 100;
    seen.insert(cents(subtotal));
    seen.insert(cents(tax));
    seen.insert(cents(subtotal + tax));
    if (seen.size() == n_items + 3) break;
  }
  const long long total = subtotal + tax;

  const std::string date =
      "2024-" + two_digits(1 + rng.below(12)) + "-" + two_digits(1 + rng.below(28));
  const std::string receipt_no = "R-" + std::to_string(10000 + rng.below(90000));
  const std::string cashier =
      std::string(rng.pick(kFirstNames)) + " " + std::string(rng.pick(kLastNames));

  PageBuilder page(doc_id, 600.0);
  page.add(kMargin, rng.pick(kStores));
  page.next_line();
  if (spec.keyword_distractors) add_keyword_distractors(page, rng, kReceiptKeywords, spec.distractors);

  Built out;
  std::size_t k = 0;
  auto ask = [&](const Field& f) {
    const BBox box = add_field(page, rng, f, 0.0, true);
    out.records.push_back(make_record(doc_id, k++, f.question, f.value, {box}));
  };
  ask({"Date", date, "What is the date?"});
  ask({"Receipt Number", receipt_no, "What is the receipt number?"});
  ask({"Cashier", cashier, "Who was the cashier?"});

  std::vector<BBox> price_boxes;
  for (std::size_t i = 0; i < n_items; ++i) {
    page.add(kMargin, names[i]);
    const std::string p = cents(prices[i]);
    price_boxes.push_back(page.add(page.right_x(p), p).bbox);
    page.next_line();
  }
  auto summary = [&](std::string_view label, const std::string& value) {
    page.add(kMargin, label);
    const BBox box = page.add(page.right_x(value), value).bbox;
    page.next_line();
    return box;
  };
  summary("Subtotal", cents(subtotal));
  const BBox tax_box = summary("Tax", cents(tax));
  const BBox total_box = summary("Total", cents(total));
  if (!spec.keyword_distractors) add_plain_distractors(page, kPlainDistractors, spec.distractors);

  out.records.push_back(make_record(doc_id, k++, "What is the tax?", cents(tax), {tax_box}));
  out.records.push_back(make_record(doc_id, k++, "What is the total?", cents(total), {total_box}));
  out.records.push_back(make_record(doc_id, k++, "What is the sum of all item prices?",
                                    cents(subtotal), {bbox_union(price_boxes)}));
  out.records.push_back(make_record(doc_id, k++, "How many items were purchased?",
                                    std::to_string(n_items), {bbox_union(price_boxes)}));
  out.doc = page.finish();
  return out;
}

Built make_form(Rng& rng, const std::string& doc_id, const SyntheticSpec& spec) {
  PageBuilder page(doc_id, 800.0);
  page.add(kMargin, rng.pick(kFormTitles));
  page.next_line();
  if (spec.keyword_distractors) add_keyword_distractors(page, rng, kFormKeywords, spec.distractors);

  const std::vector<Field> fields = {
      {"Name", std::string(rng.pick(kFirstNames)) + " " + std::string(rng.pick(kLastNames)),
       "What is the name?"},
      {"Employee ID", std::to_string(10000 + rng.below(90000)), "What is the employee id?"},
      {"Department", std::string(rng.pick(kDepartments)), "What is the department?"},
      {"Phone Number", "555-01" + two_digits(rng.below(100)), "What is the phone number?"},
      {"Start Date", "2023-" + two_digits(1 + rng.below(12)) + "-" + two_digits(1 + rng.below(28)),
       "What is the start date?"}};
  Built out;
  std::size_t k = 0;
  for (const auto& f : fields) {
    const BBox box = add_field(page, rng, f, 320.0, false);
    out.records.push_back(make_record(doc_id, k++, f.question, f.value, {box}));
  }
  if (!spec.keyword_distractors) add_plain_distractors(page, kPlainFormDistractors, spec.distractors);
  out.doc = page.finish();
  return out;
}

char32_t confusable(char32_t c, Rng& rng) {
  switch (c) {
    case U'0': return U'O';
    case U'1': return U'l';
    case U'2': return U'Z';
    case U'5': return U'S';
    case U'8': return U'B';
    case U'O': return U'0';
    case U'o': return U'0';
    case U'l': return U'1';
    case U'I': return U'1';
    case U'S': return U'5';
    case U's': return U'5';
    case U'B': return U'8';
    case U'Z': return U'2';
    case U'e': return U'c';
    case U'c': return U'e';
    case U'a': return U'o';
    case U'm': return U'n';
    case U'n': return U'm';
    case U'u': return U'v';
    case U'i': return U'l';
    case U'.': return U',';
    case U',': return U'.';
    case U':': return U';';
    case U'-': return U'_';
    case U'/': return U'|';
    default: break;
  }
  auto shift = [&](char32_t base, std::uint64_t span) {
    return static_cast<char32_t>(base + (c - base + 1 + rng.below(span - 1)) % span);
  };
  if (c >= U'a' && c <= U'z') return shift(U'a', 26);
  if (c >= U'A' && c <= U'Z') return shift(U'A', 26);
  if (c >= U'0' && c <= U'9') return shift(U'0', 10);
  return U'.';
}

void apply_noise(DocumentRecord& doc, double rate, Rng& rng, std::vector<NoiseEdit>& log) {
  for (auto& seg : doc.segments) {
    std::u32string cps = to_code_points(seg.text);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      if (cps[i] == U' ') continue;
      if (rng.unit() >= rate) continue;
      const char32_t before = cps[i];
      cps[i] = confusable(before, rng);
      log.push_back({doc.doc_id, seg.id, i, to_utf8(std::u32string(1, before)),
                     to_utf8(std::u32string(1, cps[i]))});
    }
    seg.text = to_utf8(cps);
  }
}

}  // namespace

DatasetBundle generate_synthetic(std::uint64_t seed, std::size_t n_docs, const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(seed);
  // Separate stream so noise never changes the layout drawn from `rng`.
  Rng noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  DatasetBundle bundle;
  bundle.name = "synthetic";
  for (std::size_t d = 0; d < n_docs; ++d) {
    char id[32];
    std::snprintf(id, sizeof id, "synth-%04zu", d);
    Built built = rng.unit() < spec.receipt_fraction ? make_receipt(rng, id, spec)
                                                     : make_form(rng, id, spec);
    if (spec.noise_rate > 0.0) apply_noise(built.doc, spec.noise_rate, noise_rng, bundle.noise_log);
    built.doc.validate();
    for (auto& r : built.records) bundle.records.push_back(std::move(r));
    bundle.docs.emplace(built.doc.doc_id, std::move(built.doc));
  }
  bundle.validate();
  return bundle;
}

}  // namespace docground
