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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dynfed::model {

// One named logical slice of a parameter vector.
struct Segment {
  std::string name;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;

  bool operator==(const Segment&) const = default;
};

using Layout = std::vector<Segment>;

// Total number of values described by the layout.
std::uint64_t layout_size(const Layout& layout);

// Throws PreconditionError unless segments are contiguous, ordered by offset
// and start at zero.
void validate_layout(const Layout& layout);

/// Flat model parameters plus the segment table describing the layers.
/// The unit that is trained, transferred, averaged and byte-counted.
class ParameterVector {
 public:
  ParameterVector() = default;
  ParameterVector(Layout layout, std::vector<double> values);

  static ParameterVector zeros(Layout layout);

  const Layout& layout() const { return layout_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  // Values of the named segment; throws PreconditionError if absent.
  std::span<const double> segment(std::string_view name) const;
  std::span<double> segment(std::string_view name);

  bool all_finite() const;

  // Element-wise equality on values (IEEE ==) plus layout equality.
  bool operator==(const ParameterVector& other) const;

  // Stricter than ==: identical bit patterns for every value.
  bool bit_identical(const ParameterVector& other) const;

 private:
  Layout layout_;
  std::vector<double> values_;
};

}  // namespace dynfed::model
