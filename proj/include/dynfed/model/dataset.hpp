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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dynfed::model {

// Row-major feature matrix with one class label per row.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t dim, std::size_t class_count);
  // Throws PreconditionError if shapes disagree or a label is out of range.
  Dataset(std::size_t dim, std::size_t class_count, std::vector<double> features,
          std::vector<std::uint32_t> labels);

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t class_count() const { return class_count_; }
  bool empty() const { return labels_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  std::uint32_t label(std::size_t i) const { return labels_[i]; }
  std::span<const double> features() const { return features_; }
  std::span<const std::uint32_t> labels() const { return labels_; }

  void set_label(std::size_t i, std::uint32_t label);
  void push_back(std::span<const double> row, std::uint32_t label);

  Dataset subset(std::span<const std::size_t> indices) const;
  // Number of samples per class.
  std::vector<std::size_t> class_histogram() const;

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t dim_ = 0;
  std::size_t class_count_ = 0;
  std::vector<double> features_;
  std::vector<std::uint32_t> labels_;
};

}  // namespace dynfed::model
