// Copyright 2026 The DynFed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dynfed/model/parameter_vector.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "dynfed/errors.hpp"

namespace dynfed::model {

std::uint64_t layout_size(const Layout& layout) {
  std::uint64_t total = 0;
  for (const auto& s : layout) total += s.length;
  return total;
}

void validate_layout(const Layout& layout) {
  std::uint64_t expected = 0;
  for (const auto& s : layout) {
    if (s.offset != expected) {
      throw PreconditionError("segment '" + s.name + "' starts at " + std::to_string(s.offset) +
                              ", expected " + std::to_string(expected));
    }
    expected += s.length;
  }
}

ParameterVector::ParameterVector(Layout layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  validate_layout(layout_);
  if (layout_size(layout_) != values_.size()) {
    throw PreconditionError("layout describes " + std::to_string(layout_size(layout_)) +
                            " values but " + std::to_string(values_.size()) + " were given");
  }
}

ParameterVector ParameterVector::zeros(Layout layout) {
  const auto n = layout_size(layout);
  return ParameterVector(std::move(layout), std::vector<double>(n, 0.0));
}

std::span<const double> ParameterVector::segment(std::string_view name) const {
  for (const auto& s : layout_) {
    if (s.name == name) return std::span<const double>(values_).subspan(s.offset, s.length);
  }
  throw PreconditionError("no segment named '" + std::string(name) + "'");
}

std::span<double> ParameterVector::segment(std::string_view name) {
  for (const auto& s : layout_) {
    if (s.name == name) return std::span<double>(values_).subspan(s.offset, s.length);
  }
  throw PreconditionError("no segment named '" + std::string(name) + "'");
}

bool ParameterVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool ParameterVector::operator==(const ParameterVector& other) const {
  return layout_ == other.layout_ && values_ == other.values_;
}

bool ParameterVector::bit_identical(const ParameterVector& other) const {
  if (layout_ != other.layout_ || values_.size() != other.values_.size()) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(values_[i]) != std::bit_cast<std::uint64_t>(other.values_[i])) {
      return false;
    }
  }
  return true;
}

}  // namespace dynfed::model
