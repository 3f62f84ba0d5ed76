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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace docground {

enum class ComputeOp { Sum, Count, Min, Max, Mean };

std::string_view to_string(ComputeOp op);
ComputeOp compute_op_from_string(std::string_view name);

struct NumericValue {
  double value = 0.0;
  std::string source_segment_id;
  std::string raw_text;
};

class ComputeRequest {
 public:
  // Throws ConsistencyError when operands is empty.
  ComputeRequest(ComputeOp op, std::vector<NumericValue> operands);

  ComputeOp op() const { return op_; }
  const std::vector<NumericValue>& operands() const { return operands_; }

 private:
  ComputeOp op_;
  std::vector<NumericValue> operands_;
};

// Accepts an optional sign, one leading or trailing symbol from {$ € £ ¥ %},
// comma thousands separators in 3-digit groups and a period decimal mark.
// Decimal-comma numbers such as "12,50" are rejected.
std::optional<double> parse_number(std::string_view text);

// Digits after the decimal point in a string parse_number accepts, else 0.
std::size_t decimal_places(std::string_view text);

// SUM uses compensated left-to-right summation; MEAN = SUM / COUNT.
double compute(const ComputeRequest& request);

// Fixed-point text with the maximum decimal places seen among the operands
// (COUNT is always an integer).
std::string format_result(const ComputeRequest& request, double value);

}  // namespace docground
