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

#include "dynfed/model/dataset.hpp"

#include <string>

#include "dynfed/errors.hpp"

namespace dynfed::model {

Dataset::Dataset(std::size_t dim, std::size_t class_count) : dim_(dim), class_count_(class_count) {}

Dataset::Dataset(std::size_t dim, std::size_t class_count, std::vector<double> features,
                 std::vector<std::uint32_t> labels)
    : dim_(dim), class_count_(class_count), features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.size() != labels_.size() * dim_) {
    throw PreconditionError("dataset has " + std::to_string(features_.size()) + " feature values for " +
                            std::to_string(labels_.size()) + " rows of dim " + std::to_string(dim_));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= class_count_) {
      throw PreconditionError("label " + std::to_string(labels_[i]) + " at row " + std::to_string(i) +
                              " is not below class count " + std::to_string(class_count_));
    }
  }
}

void Dataset::set_label(std::size_t i, std::uint32_t label) {
  if (label >= class_count_) throw PreconditionError("label out of range");
  labels_.at(i) = label;
}

void Dataset::push_back(std::span<const double> row, std::uint32_t label) {
  if (row.size() != dim_) throw PreconditionError("row width does not match dataset dim");
  if (label >= class_count_) throw PreconditionError("label out of range");
  features_.insert(features_.end(), row.begin(), row.end());
  labels_.push_back(label);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out(dim_, class_count_);
  out.features_.reserve(indices.size() * dim_);
  out.labels_.reserve(indices.size());
  for (auto i : indices) out.push_back(row(i), labels_.at(i));
  return out;
}

std::vector<std::size_t> Dataset::class_histogram() const {
  std::vector<std::size_t> counts(class_count_, 0);
  for (auto l : labels_) ++counts[l];
  return counts;
}

}  // namespace dynfed::model
