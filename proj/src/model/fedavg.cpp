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

#include "dynfed/model/fedavg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <vector>

#include "dynfed/errors.hpp"

namespace dynfed::model {

std::string_view to_string(AggregationMode mode) {
  return mode == AggregationMode::kSampleWeighted ? "sample-weighted" : "unweighted";
}

AggregationMode parse_aggregation_mode(std::string_view text) {
  if (text == "unweighted") return AggregationMode::kUnweighted;
  if (text == "sample-weighted") return AggregationMode::kSampleWeighted;
  throw ConfigError({"aggregation: unknown mode '" + std::string(text) + "'"});
}

namespace {

// Total order on contributions by content so that the fold below sees the
// same sequence regardless of how callers ordered their list.
bool canonical_less(const Contribution& a, const Contribution& b) {
  if (a.sample_count != b.sample_count) return a.sample_count < b.sample_count;
  const auto av = a.params->values();
  const auto bv = b.params->values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const auto x = std::bit_cast<std::uint64_t>(av[i]);
    const auto y = std::bit_cast<std::uint64_t>(bv[i]);
    if (x != y) return x < y;
  }
  return false;
}

}  // namespace

ParameterVector fedavg(std::span<const Contribution> updates, AggregationMode mode) {
  if (updates.empty()) throw PreconditionError("fedavg needs at least one update");
  const auto& layout = updates.front().params->layout();
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const auto& u = updates[i];
    if (u.params == nullptr) throw PreconditionError("fedavg update " + std::to_string(i) + " is null");
    if (u.sample_count == 0) {
      throw PreconditionError("fedavg update " + std::to_string(i) + " has zero samples");
    }
    if (u.params->layout() != layout) {
      throw AggregationError("client " + std::to_string(i) + " sent a model whose layout differs", i);
    }
    if (!u.params->all_finite()) {
      throw AggregationError("client " + std::to_string(i) + " sent non-finite parameters", i);
    }
  }

  std::vector<Contribution> ordered(updates.begin(), updates.end());
  std::sort(ordered.begin(), ordered.end(), canonical_less);

  // Step factors w_k / W_k of the running mean.
  std::vector<double> step(ordered.size());
  std::uint64_t seen = 0;
  for (std::size_t k = 0; k < ordered.size(); ++k) {
    const std::uint64_t w = mode == AggregationMode::kSampleWeighted ? ordered[k].sample_count : 1;
    seen += w;
    step[k] = static_cast<double>(w) / static_cast<double>(seen);
  }

  const std::size_t n = ordered.front().params->size();
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double mean = ordered[0].params->values()[j];
    double lo = mean;
    double hi = mean;
    for (std::size_t k = 1; k < ordered.size(); ++k) {
      const double x = ordered[k].params->values()[j];
      mean += (x - mean) * step[k];
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    out[j] = std::clamp(mean, lo, hi);
  }
  return ParameterVector(layout, std::move(out));
}

}  // namespace dynfed::model
