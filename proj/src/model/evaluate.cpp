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

#include "dynfed/model/evaluate.hpp"

#include <cmath>
#include <string>

#include "dynfed/errors.hpp"

namespace dynfed::model {

void forward(const ModelSpec& spec, std::span<const double> params, std::span<const double> input,
             ForwardWorkspace& workspace, std::span<double> scores) {
  const auto d = spec.dims();
  const std::size_t layers = d.size() - 1;
  workspace.activations.resize(layers);
  std::span<const double> in = input;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_in = d[l];
    const std::size_t fan_out = d[l + 1];
    const double* w = params.data() + offset;
    const double* b = w + fan_out * fan_in;
    offset += fan_out * fan_in + fan_out;

    const bool last = l + 1 == layers;
    std::span<double> out = scores;
    if (!last) {
      workspace.activations[l].resize(fan_out);
      out = workspace.activations[l];
    }
    for (std::size_t o = 0; o < fan_out; ++o) {
      double z = b[o];
      const double* row = w + o * fan_in;
      for (std::size_t i = 0; i < fan_in; ++i) z += row[i] * in[i];
      out[o] = last ? z : std::tanh(z);
    }
    in = out;
  }
}

std::size_t argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return best;
}

double evaluate(const ParameterVector& model, const ModelSpec& spec, const Dataset& data) {
  if (model.size() != spec.parameter_count()) {
    throw EvaluationError("model has " + std::to_string(model.size()) + " values, spec expects " +
                          std::to_string(spec.parameter_count()));
  }
  if (data.dim() != spec.input_dim) {
    throw EvaluationError("dataset dim " + std::to_string(data.dim()) + " does not match model input dim " +
                          std::to_string(spec.input_dim));
  }
  if (data.class_count() != spec.class_count) {
    throw EvaluationError("dataset class count does not match model");
  }
  if (data.empty()) throw EvaluationError("cannot evaluate on an empty dataset");

  ForwardWorkspace workspace;
  std::vector<double> scores(spec.class_count);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward(spec, model.values(), data.row(i), workspace, scores);
    if (argmax(scores) == data.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace dynfed::model
