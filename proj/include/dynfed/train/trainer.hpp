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
#include <vector>

#include "dynfed/model/dataset.hpp"
#include "dynfed/model/model_spec.hpp"
#include "dynfed/model/parameter_vector.hpp"

namespace dynfed::train {

struct Hyperparameters {
  double lr = 0.1;
  std::size_t batch_size = 32;
  int epochs = 90;

  bool operator==(const Hyperparameters&) const = default;
};

/// Per-client training backend. The declared costs are the simulated compute
/// model: one local epoch takes epoch_cost_ms of virtual time regardless of
/// host speed, plus extra_delay_ms per round for injected slowness.
struct TrainerHandle {
  model::ModelSpec spec;
  double lr = 0.1;
  std::size_t batch_size = 32;
  std::int64_t epoch_cost_ms = 50;
  std::int64_t extra_delay_ms = 0;
  std::uint64_t seed = 0;
};

// Simulated training time for one round: epochs x epoch cost + extra delay.
std::int64_t measure_training_time(const TrainerHandle& trainer, int epochs);

/// Mean softmax cross-entropy over the rows `batch` of `data`, and its
/// gradient with respect to the active parameters written into `gradient`
/// (size spec.active_parameter_count()). Uses max-subtraction in the softmax.
double loss_and_gradient(const model::ModelSpec& spec, std::span<const double> params,
                         const model::Dataset& data, std::span<const std::size_t> batch,
                         std::span<double> gradient);

// Mean cross-entropy over the whole dataset.
double dataset_loss(const model::ModelSpec& spec, std::span<const double> params, const model::Dataset& data);

struct TrainResult {
  model::ParameterVector params;
  double train_accuracy = 0.0;
  std::vector<double> epoch_losses;  // mean batch loss per epoch
};

/// Mini-batch SGD (no momentum) over `epochs` passes. Each epoch shuffles the
/// sample order with a stream derived from `seed`. Padding values are copied
/// through untouched. Throws TrainingError naming the 1-based epoch when the
/// loss stops being finite.
TrainResult train_epochs(const model::ParameterVector& initial, const model::ModelSpec& spec,
                         const model::Dataset& data, const Hyperparameters& hp, int epochs,
                         std::uint64_t seed);

}  // namespace dynfed::train
