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

#include "dynfed/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dynfed/errors.hpp"
#include "dynfed/model/evaluate.hpp"
#include "dynfed/rng.hpp"

namespace dynfed::train {

std::int64_t measure_training_time(const TrainerHandle& trainer, int epochs) {
  return static_cast<std::int64_t>(epochs) * trainer.epoch_cost_ms + trainer.extra_delay_ms;
}

namespace {

struct Backprop {
  std::vector<std::size_t> dims;
  std::vector<std::vector<double>> act;    // act[0] = input, act[l] = output of layer l-1
  std::vector<std::vector<double>> delta;  // delta[l] = dLoss/dz for layer l
  std::vector<std::size_t> offsets;        // weight offset of each layer

  explicit Backprop(const model::ModelSpec& spec) : dims(spec.dims()) {
    const std::size_t layers = dims.size() - 1;
    act.resize(layers + 1);
    delta.resize(layers);
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      act[l + 1].resize(dims[l + 1]);
      delta[l].resize(dims[l + 1]);
      offsets.push_back(offset);
      offset += dims[l + 1] * dims[l] + dims[l + 1];
    }
  }

  // Returns the sample's cross-entropy and accumulates its gradient.
  double accumulate(std::span<const double> params, std::span<const double> x, std::uint32_t label,
                    std::span<double> grad, bool want_grad) {
    const std::size_t layers = dims.size() - 1;
    act[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = dims[l];
      const std::size_t out = dims[l + 1];
      const double* w = params.data() + offsets[l];
      const double* b = w + out * in;
      for (std::size_t o = 0; o < out; ++o) {
        double z = b[o];
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) z += row[i] * act[l][i];
        act[l + 1][o] = l + 1 == layers ? z : std::tanh(z);
      }
    }

    auto& logits = act[layers];
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - peak);
    const double log_norm = peak + std::log(sum);
    const double loss = log_norm - logits[label];
    if (!want_grad) return loss;

    auto& top = delta[layers - 1];
    for (std::size_t c = 0; c < logits.size(); ++c) {
      top[c] = std::exp(logits[c] - log_norm) - (c == label ? 1.0 : 0.0);
    }
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = dims[l];
      const std::size_t out = dims[l + 1];
      double* gw = grad.data() + offsets[l];
      double* gb = gw + out * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[l][o];
        gb[o] += d;
        double* grow = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += d * act[l][i];
      }
      if (l == 0) break;
      const double* w = params.data() + offsets[l];
      auto& below = delta[l - 1];
      for (std::size_t i = 0; i < in; ++i) {
        double s = 0.0;
        for (std::size_t o = 0; o < out; ++o) s += w[o * in + i] * delta[l][o];
        const double a = act[l][i];
        below[i] = s * (1.0 - a * a);
      }
    }
    return loss;
  }
};

}  // namespace

double loss_and_gradient(const model::ModelSpec& spec, std::span<const double> params,
                         const model::Dataset& data, std::span<const std::size_t> batch,
                         std::span<double> gradient) {
  if (gradient.size() != spec.active_parameter_count()) {
    throw PreconditionError("gradient buffer has the wrong size");
  }
  if (batch.empty()) throw PreconditionError("empty batch");
  std::fill(gradient.begin(), gradient.end(), 0.0);
  Backprop bp(spec);
  double loss = 0.0;
  for (auto i : batch) loss += bp.accumulate(params, data.row(i), data.label(i), gradient, true);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (auto& g : gradient) g *= scale;
  return loss * scale;
}

double dataset_loss(const model::ModelSpec& spec, std::span<const double> params, const model::Dataset& data) {
  Backprop bp(spec);
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) loss += bp.accumulate(params, data.row(i), data.label(i), {}, false);
  return loss / static_cast<double>(data.size());
}

TrainResult train_epochs(const model::ParameterVector& initial, const model::ModelSpec& spec,
                         const model::Dataset& data, const Hyperparameters& hp, int epochs,
                         std::uint64_t seed) {
  if (initial.size() != spec.parameter_count()) throw PreconditionError("model does not match spec");
  if (data.dim() != spec.input_dim || data.class_count() != spec.class_count) {
    throw PreconditionError("dataset does not match model spec");
  }
  if (data.empty()) throw PreconditionError("cannot train on an empty dataset");
  if (hp.batch_size == 0) throw PreconditionError("batch size must be positive");

  TrainResult result{initial, 0.0, {}};
  auto params = result.params.values().first(spec.active_parameter_count());
  std::vector<double> grad(params.size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  Backprop bp(spec);

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const auto batch = std::span<const std::size_t>(order).subspan(
          start, std::min(hp.batch_size, order.size() - start));
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (auto i : batch) loss += bp.accumulate(params, data.row(i), data.label(i), grad, true);
      loss /= static_cast<double>(batch.size());
      if (!std::isfinite(loss)) {
        throw TrainingError("loss diverged in epoch " + std::to_string(epoch), epoch);
      }
      const double step = hp.lr / static_cast<double>(batch.size());
      for (std::size_t k = 0; k < params.size(); ++k) params[k] -= step * grad[k];
      epoch_loss += loss;
      ++batches;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
  }
  if (!result.params.all_finite()) {
    throw TrainingError("parameters became non-finite", epochs);
  }
  result.train_accuracy = model::evaluate(result.params, spec, data);
  return result;
}

}  // namespace dynfed::train
