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

#include "docground/compute.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "docground/error.hpp"
#include "docground/text.hpp"

namespace docground {

std::string_view to_string(ComputeOp op) {
  switch (op) {
    case ComputeOp::Sum: return "SUM";
    case ComputeOp::Count: return "COUNT";
    case ComputeOp::Min: return "MIN";
    case ComputeOp::Max: return "MAX";
    case ComputeOp::Mean: return "MEAN";
  }
  return "SUM";
}

ComputeOp compute_op_from_string(std::string_view name) {
  for (auto op : {ComputeOp::Sum, ComputeOp::Count, ComputeOp::Min, ComputeOp::Max,
                  ComputeOp::Mean}) {
    if (to_string(op) == name) return op;
  }
  throw ParseError("unknown compute op '" + std::string(name) + "'");
}

ComputeRequest::ComputeRequest(ComputeOp op, std::vector<NumericValue> operands)
    : op_(op), operands_(std::move(operands)) {
  if (operands_.empty()) throw ConsistencyError("compute request needs at least one operand");
}

namespace {

constexpr std::array<std::string_view, 5> kSymbols = {"$", "€", "£", "¥", "%"};

bool strip_prefix_symbol(std::string_view& s) {
  for (auto sym : kSymbols) {
    if (s.starts_with(sym)) {
      s.remove_prefix(sym.size());
      return true;
    }
  }
  return false;
}

bool strip_suffix_symbol(std::string_view& s) {
  for (auto sym : kSymbols) {
    if (s.ends_with(sym)) {
      s.remove_suffix(sym.size());
      return true;
    }
  }
  return false;
}

bool all_digits(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Validates "[digits with optional 3-digit comma groups][.digits]" and returns
// the text with commas removed.
std::optional<std::string> plain_number(std::string_view s) {
  const auto dot = s.find('.');
  std::string_view int_part = s.substr(0, dot);
  std::string_view frac_part = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (!all_digits(frac_part)) return std::nullopt;
  if (int_part.empty() && frac_part.empty()) return std::nullopt;

  std::string digits;
  if (int_part.find(',') != std::string_view::npos) {
    std::size_t start = 0;
    bool first = true;
    while (true) {
      const auto comma = int_part.find(',', start);
      const std::string_view group = int_part.substr(start, comma - start);
      if (!all_digits(group) || group.empty()) return std::nullopt;
      if (first ? group.size() > 3 : group.size() != 3) return std::nullopt;
      digits += group;
      first = false;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  } else {
    if (!all_digits(int_part)) return std::nullopt;
    digits = std::string(int_part);
  }
  if (digits.empty()) digits = "0";
  if (dot != std::string_view::npos) {
    digits += '.';
    digits += frac_part.empty() ? std::string_view("0") : frac_part;
  }
  return digits;
}

}  // namespace

std::optional<double> parse_number(std::string_view text) {
  std::string_view s = trim(text);
  bool negative = false;
  auto take_sign = [&] {
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
      negative = s.front() == '-';
      s.remove_prefix(1);
      return true;
    }
    return false;
  };
  const bool signed_first = take_sign();
  const bool had_prefix = strip_prefix_symbol(s);
  if (had_prefix && !signed_first) take_sign();
  if (!had_prefix) strip_suffix_symbol(s);
  if (s.empty()) return std::nullopt;

  const auto plain = plain_number(s);
  if (!plain) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(plain->data(), plain->data() + plain->size(), value);
  if (ec != std::errc{} || ptr != plain->data() + plain->size()) return std::nullopt;
  return negative ? -value : value;
}

std::size_t decimal_places(std::string_view text) {
  if (!parse_number(text)) return 0;
  const std::string_view s = trim(text);
  const auto dot = s.find('.');
  if (dot == std::string_view::npos) return 0;
  std::size_t n = 0;
  for (std::size_t i = dot + 1; i < s.size() && s[i] >= '0' && s[i] <= '9'; ++i) ++n;
  return n;
}

double compute(const ComputeRequest& request) {
  const auto& xs = request.operands();
  switch (request.op()) {
    case ComputeOp::Count:
      return static_cast<double>(xs.size());
    case ComputeOp::Min:
      return std::min_element(xs.begin(), xs.end(), [](const auto& a, const auto& b) {
               return a.value < b.value;
             })->value;
    case ComputeOp::Max:
      return std::max_element(xs.begin(), xs.end(), [](const auto& a, const auto& b) {
               return a.value < b.value;
             })->value;
    case ComputeOp::Sum:
    case ComputeOp::Mean: {
      // Neumaier summation.
      double sum = 0.0;
      double carry = 0.0;
      for (const auto& x : xs) {
        const double t = sum + x.value;
        carry += std::abs(sum) >= std::abs(x.value) ? (sum - t) + x.value : (x.value - t) + sum;
        sum = t;
      }
      sum += carry;
      return request.op() == ComputeOp::Sum ? sum : sum / static_cast<double>(xs.size());
    }
  }
  return 0.0;
}

std::string format_result(const ComputeRequest& request, double value) {
  std::size_t places = 0;
  if (request.op() != ComputeOp::Count) {
    for (const auto& x : request.operands()) places = std::max(places, decimal_places(x.raw_text));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", static_cast<int>(places), value);
  std::string out(buf);
  if (out.starts_with('-') && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
  return out;
}

}  // namespace docground
