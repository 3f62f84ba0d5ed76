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

#include "docground/ocr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "docground/error.hpp"

namespace docground {

std::string_view to_string(GroupKind kind) { return kind == GroupKind::Line ? "LINE" : "BLOCK"; }

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

std::vector<std::vector<std::size_t>> cluster_lines(std::span<const TextSegment> segments,
                                                    const LayoutConfig& config) {
  const std::size_t n = segments.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const BBox& a = segments[i].bbox;
      const BBox& b = segments[j].bbox;
      const double limit = config.line_center_ratio * std::min(a.height(), b.height());
      if (std::abs(a.center_y() - b.center_y()) <= limit) {
        parent[find_root(parent, j)] = find_root(parent, i);
      }
    }
  }

  std::vector<std::vector<std::size_t>> lines;
  std::vector<std::size_t> line_of(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = find_root(parent, i);
    if (line_of[root] == n) {
      line_of[root] = lines.size();
      lines.emplace_back();
    }
    lines[line_of[root]].push_back(i);
  }

  auto member_key = [&](std::size_t i) {
    return std::make_tuple(segments[i].bbox.x_min, segments[i].bbox.y_min, i);
  };
  for (auto& line : lines) {
    std::sort(line.begin(), line.end(),
              [&](std::size_t a, std::size_t b) { return member_key(a) < member_key(b); });
  }
  auto line_key = [&](const std::vector<std::size_t>& line) {
    double top = segments[line.front()].bbox.y_min;
    double left = segments[line.front()].bbox.x_min;
    std::size_t first = line.front();
    for (std::size_t i : line) {
      top = std::min(top, segments[i].bbox.y_min);
      left = std::min(left, segments[i].bbox.x_min);
      first = std::min(first, i);
    }
    return std::make_tuple(top, left, first);
  };
  std::sort(lines.begin(), lines.end(),
            [&](const auto& a, const auto& b) { return line_key(a) < line_key(b); });
  return lines;
}

std::vector<TextSegment> assign_reading_order(std::vector<TextSegment> segments,
                                              const LayoutConfig& config) {
  std::vector<TextSegment> ordered;
  ordered.reserve(segments.size());
  for (const auto& line : cluster_lines(segments, config)) {
    for (std::size_t i : line) {
      ordered.push_back(std::move(segments[i]));
      ordered.back().order_index = ordered.size() - 1;
    }
  }
  return ordered;
}

std::vector<SegmentGroup> group_segments(const DocumentRecord& doc, GroupKind kind,
                                         const LayoutConfig& config) {
  struct Line {
    std::vector<std::string> ids;
    BBox box;
  };
  std::vector<Line> lines;
  for (const auto& members : cluster_lines(doc.segments, config)) {
    Line line;
    std::vector<BBox> boxes;
    for (std::size_t i : members) {
      line.ids.push_back(doc.segments[i].id);
      boxes.push_back(doc.segments[i].bbox);
    }
    line.box = bbox_union(boxes);
    lines.push_back(std::move(line));
  }

  std::vector<SegmentGroup> groups;
  if (kind == GroupKind::Line) {
    for (auto& line : lines) {
      groups.push_back({"line-" + std::to_string(groups.size()), std::move(line.ids),
                        GroupKind::Line, line.box});
    }
    return groups;
  }

  if (lines.empty()) return groups;
  std::vector<double> heights;
  for (const auto& line : lines) heights.push_back(line.box.height());
  std::sort(heights.begin(), heights.end());
  const std::size_t mid = heights.size() / 2;
  const double median =
      heights.size() % 2 == 1 ? heights[mid] : 0.5 * (heights[mid - 1] + heights[mid]);
  const double max_gap = config.block_gap_ratio * median;

  SegmentGroup current{"", lines.front().ids, GroupKind::Block, lines.front().box};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const double gap = lines[i].box.y_min - lines[i - 1].box.y_max;
    if (gap <= max_gap) {
      current.member_ids.insert(current.member_ids.end(), lines[i].ids.begin(),
                                lines[i].ids.end());
      const BBox pair[] = {current.bbox, lines[i].box};
      current.bbox = bbox_union(pair);
    } else {
      current.group_id = "block-" + std::to_string(groups.size());
      groups.push_back(std::move(current));
      current = SegmentGroup{"", lines[i].ids, GroupKind::Block, lines[i].box};
    }
  }
  current.group_id = "block-" + std::to_string(groups.size());
  groups.push_back(std::move(current));
  return groups;
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ParseError(where + ": " + what);
}

double number_field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail(where + "." + key, "missing");
  const Json& v = obj[key];
  if (!v.is_number()) fail(where + "." + key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(where + "." + key, "not finite");
  return d;
}

std::string string_field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail(where + "." + key, "missing");
  const Json& v = obj[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return v.dump();
  fail(where + "." + key, "expected a string");
}

}  // namespace

DocumentRecord document_from_json(const Json& j, const LayoutConfig& config) {
  if (!j.is_object()) fail("document", "expected a JSON object");
  DocumentRecord doc;
  doc.doc_id = string_field(j, "doc_id", "document");
  doc.page_width = number_field(j, "page_width", "document");
  doc.page_height = number_field(j, "page_height", "document");
  if (j.contains("image_ref") && !j["image_ref"].is_null()) {
    if (!j["image_ref"].is_string()) fail("document.image_ref", "expected a string");
    doc.image_ref = j["image_ref"].get<std::string>();
  }
  if (!j.contains("segments")) fail("document.segments", "missing");
  if (!j["segments"].is_array()) fail("document.segments", "expected an array");

  std::size_t with_order = 0;
  const Json& segs = j["segments"];
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string where = "segments[" + std::to_string(i) + "]";
    const Json& s = segs[i];
    if (!s.is_object()) fail(where, "expected an object");
    TextSegment seg;
    seg.id = string_field(s, "id", where);
    seg.text = string_field(s, "text", where);
    if (!has_visible_text(seg.text)) fail(where + ".text", "empty after trimming");
    if (!s.contains("bbox")) fail(where + ".bbox", "missing");
    const Json& b = s["bbox"];
    if (!b.is_array() || b.size() != 4 ||
        !std::all_of(b.begin(), b.end(), [](const Json& v) { return v.is_number(); })) {
      fail(where + ".bbox", "expected [x_min, y_min, x_max, y_max]");
    }
    seg.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    if (!seg.bbox.valid()) fail(where + ".bbox", "invalid box " + to_string(seg.bbox));
    seg.confidence = s.contains("confidence") ? number_field(s, "confidence", where) : 1.0;
    if (s.contains("order_index") && !s["order_index"].is_null()) {
      const Json& o = s["order_index"];
      if (!o.is_number_unsigned() && !(o.is_number_integer() && o.get<long long>() >= 0)) {
        fail(where + ".order_index", "expected a non-negative integer");
      }
      seg.order_index = o.get<std::size_t>();
      ++with_order;
    }
    doc.segments.push_back(std::move(seg));
  }

  if (with_order == 0) {
    doc.segments = assign_reading_order(std::move(doc.segments), config);
  } else if (with_order == doc.segments.size()) {
    std::stable_sort(doc.segments.begin(), doc.segments.end(),
                     [](const auto& a, const auto& b) { return a.order_index < b.order_index; });
  } else {
    fail("document.segments", "order_index must be present on all segments or none");
  }
  doc.validate();
  return doc;
}

DocumentRecord parse_ocr_json(std::string_view bytes, const LayoutConfig& config) {
  Json j;
  try {
    j = Json::parse(bytes);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("OCR JSON is not valid JSON: ") + e.what());
  }
  return document_from_json(j, config);
}

Json document_to_json(const DocumentRecord& doc) {
  Json segs = Json::array();
  for (const auto& s : doc.segments) {
    segs.push_back({{"id", s.id},
                    {"text", s.text},
                    {"bbox", {s.bbox.x_min, s.bbox.y_min, s.bbox.x_max, s.bbox.y_max}},
                    {"confidence", s.confidence},
                    {"order_index", s.order_index}});
  }
  Json j{{"doc_id", doc.doc_id},
         {"page_width", doc.page_width},
         {"page_height", doc.page_height},
         {"segments", std::move(segs)}};
  if (doc.image_ref) j["image_ref"] = *doc.image_ref;
  return j;
}

std::string serialize_ocr_json(const DocumentRecord& doc) { return document_to_json(doc).dump(2); }

DocumentRecord MockOcrClient::recognize(const std::string&) {
  calls_.fetch_add(1);
  return page_;
}

DocumentRecord RemoteOcrClient::recognize(const std::string& image_ref) {
  const Json response = client_->call(make_envelope("ocr", Json{{"image_ref", image_ref}}));
  const Json& payload = envelope_payload(response, "ocr");
  try {
    return document_from_json(payload);
  } catch (const ParseError& e) {
    throw ParseError(std::string("malformed OCR service response (") + e.what() +
                     "); payload: " + payload.dump().substr(0, 240));
  }
}

DocumentRecord run_ocr(const std::string& image_ref, OcrClient& client,
                       const LayoutConfig& config) {
  DocumentRecord doc = client.recognize(image_ref);
  for (const auto& s : doc.segments) {
    if (!s.bbox.valid()) {
      throw ParseError("OCR segment '" + s.id + "' has invalid box " + to_string(s.bbox));
    }
  }
  doc.segments = assign_reading_order(std::move(doc.segments), config);
  if (!doc.image_ref) doc.image_ref = image_ref;
  doc.validate();
  return doc;
}

}  // namespace docground
