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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docground/document.hpp"
#include "docground/service.hpp"

namespace docground {

struct LayoutConfig {
  // Two segments share a line when their vertical centers differ by at most
  // line_center_ratio * min(height_a, height_b).
  double line_center_ratio = 0.5;
  // Consecutive lines join one block when the gap is at most
  // block_gap_ratio * median line height.
  double block_gap_ratio = 1.0;
};

enum class GroupKind { Line, Block };

std::string_view to_string(GroupKind kind);

struct SegmentGroup {
  std::string group_id;
  std::vector<std::string> member_ids;
  GroupKind kind = GroupKind::Line;
  BBox bbox;
};

// Line clusters as index lists into `segments`, lines in reading order and
// members left to right. Ties break on (y_min, x_min, input position).
std::vector<std::vector<std::size_t>> cluster_lines(std::span<const TextSegment> segments,
                                                    const LayoutConfig& config = {});

// Returns the same segments sorted into reading order with order_index 0..n-1.
std::vector<TextSegment> assign_reading_order(std::vector<TextSegment> segments,
                                              const LayoutConfig& config = {});

std::vector<SegmentGroup> group_segments(const DocumentRecord& doc, GroupKind kind,
                                         const LayoutConfig& config = {});

// Canonical OCR JSON:
//   {doc_id, page_width, page_height, image_ref?,
//    segments: [{id, text, bbox: [x_min, y_min, x_max, y_max], confidence, order_index?}]}
// order_index must be given for every segment or for none; when absent the
// reading order is computed.
DocumentRecord parse_ocr_json(std::string_view bytes, const LayoutConfig& config = {});
DocumentRecord document_from_json(const Json& j, const LayoutConfig& config = {});
Json document_to_json(const DocumentRecord& doc);
std::string serialize_ocr_json(const DocumentRecord& doc);

class OcrClient {
 public:
  virtual ~OcrClient() = default;
  // Raw recognizer output; reading order is assigned by run_ocr.
  virtual DocumentRecord recognize(const std::string& image_ref) = 0;
};

// Returns a fixed page for every image.
class MockOcrClient final : public OcrClient {
 public:
  explicit MockOcrClient(DocumentRecord page) : page_(std::move(page)) {}
  DocumentRecord recognize(const std::string& image_ref) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  DocumentRecord page_;
  std::atomic<std::size_t> calls_{0};
};

// Request payload {image_ref}; response payload is canonical OCR JSON.
class RemoteOcrClient final : public OcrClient {
 public:
  explicit RemoteOcrClient(std::shared_ptr<ServiceClient> client) : client_(std::move(client)) {}
  DocumentRecord recognize(const std::string& image_ref) override;

 private:
  std::shared_ptr<ServiceClient> client_;
};

DocumentRecord run_ocr(const std::string& image_ref, OcrClient& client,
                       const LayoutConfig& config = {});

}  // namespace docground
