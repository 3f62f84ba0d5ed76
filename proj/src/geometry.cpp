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

#include "docground/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "docground/error.hpp"

namespace docground {

bool BBox::valid() const {
  for (double v : {x_min, y_min, x_max, y_max}) {
    if (!std::isfinite(v) || v < 0.0) return false;
  }
  return x_min <= x_max && y_min <= y_max;
}

bool BBox::contains(const BBox& other) const {
  return x_min <= other.x_min && y_min <= other.y_min && x_max >= other.x_max &&
         y_max >= other.y_max;
}

bool BBox::within_page(double page_width, double page_height) const {
  return x_max <= page_width && y_max <= page_height;
}

std::string to_string(const BBox& box) {
  std::ostringstream out;
  out << '(' << box.x_min << ", " << box.y_min << ", " << box.x_max << ", " << box.y_max << ')';
  return out.str();
}

double bbox_iou(const BBox& a, const BBox& b) {
  const bool a_flat = a.degenerate();
  const bool b_flat = b.degenerate();
  if (a_flat || b_flat) return (a_flat && b_flat && a == b) ? 1.0 : 0.0;

  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBox bbox_union(std::span<const BBox> boxes) {
  if (boxes.empty()) throw ConsistencyError("bbox_union called with no boxes");
  BBox out = boxes.front();
  for (const BBox& b : boxes.subspan(1)) {
    out.x_min = std::min(out.x_min, b.x_min);
    out.y_min = std::min(out.y_min, b.y_min);
    out.x_max = std::max(out.x_max, b.x_max);
    out.y_max = std::max(out.y_max, b.y_max);
  }
  return out;
}

}  // namespace docground
