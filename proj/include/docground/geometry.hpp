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

#include <span>
#include <string>

namespace docground {

// Axis-aligned box in page pixels. Origin top-left, x grows right, y grows down.
// Area is continuous: (x_max - x_min) * (y_max - y_min).
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  bool degenerate() const { return width() <= 0.0 || height() <= 0.0; }

  // Finite, non-negative, and ordered corners.
  bool valid() const;
  bool contains(const BBox& other) const;
  bool within_page(double page_width, double page_height) const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

std::string to_string(const BBox& box);

// Intersection over union. Degenerate boxes score 1.0 only against an
// identical degenerate box and 0.0 otherwise.
double bbox_iou(const BBox& a, const BBox& b);

// Smallest box enclosing all inputs. Throws ConsistencyError on an empty list.
BBox bbox_union(std::span<const BBox> boxes);

}  // namespace docground
