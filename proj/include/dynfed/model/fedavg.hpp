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
#include <string_view>

#include "dynfed/model/parameter_vector.hpp"

namespace dynfed::model {

enum class AggregationMode { kUnweighted, kSampleWeighted };

std::string_view to_string(AggregationMode mode);
AggregationMode parse_aggregation_mode(std::string_view text);

struct Contribution {
  const ParameterVector* params = nullptr;
  std::uint64_t sample_count = 0;
};

/// Federated averaging of client models.
///
/// Unweighted mode is the plain element-wise mean; weighted mode weights each
/// client by sample_count / total. Contributions are first put into a
/// canonical order (by content), then folded with a running mean, so the
/// result does not depend on the order of `updates` and averaging k copies
/// of one vector returns it bit-for-bit. Each element is clamped to the
/// [min, max] of its inputs.
///
/// Throws PreconditionError for an empty list or zero sample count and
/// AggregationError (with the client index) on layout mismatch or
/// non-finite input.
ParameterVector fedavg(std::span<const Contribution> updates, AggregationMode mode);

}  // namespace dynfed::model
