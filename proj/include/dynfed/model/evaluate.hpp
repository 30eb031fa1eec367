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
#include <span>
#include <vector>

#include "dynfed/model/dataset.hpp"
#include "dynfed/model/model_spec.hpp"
#include "dynfed/model/parameter_vector.hpp"

namespace dynfed::model {

// Reusable buffers for the forward pass; one per thread of evaluation.
struct ForwardWorkspace {
  std::vector<std::vector<double>> activations;
};

// Fills `scores` (size class_count) with the logits for one sample.
// `params` must hold at least spec.active_parameter_count() values.
void forward(const ModelSpec& spec, std::span<const double> params,
             std::span<const double> input, ForwardWorkspace& workspace,
             std::span<double> scores);

// Index of the largest score; ties go to the lowest index.
std::size_t argmax(std::span<const double> scores);

/// Fraction of samples whose argmax prediction equals the label.
/// Throws EvaluationError on dimension or layout mismatch or empty data.
double evaluate(const ParameterVector& model, const ModelSpec& spec, const Dataset& data);

}  // namespace dynfed::model
