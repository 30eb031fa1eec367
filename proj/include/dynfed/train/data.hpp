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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynfed/model/dataset.hpp"
#include "dynfed/train/trainer.hpp"

namespace dynfed::train {

/// Gaussian blobs with unit covariance. Class means sit on the vertices of a
/// regular simplex (randomly rotated into `dim` dimensions) with pairwise
/// distance `separation`; when dim is too small for a simplex the means are
/// spread evenly on a circle (or a line for dim 1) with the same minimum
/// distance. Labels are balanced (sample i has class i mod classes before the
/// final shuffle).
model::Dataset generate_synthetic(std::size_t classes, std::size_t dim, std::size_t pool_size,
                                  double separation, std::uint64_t seed);

struct PartitionPlan {
  std::vector<std::size_t> client_sizes;
  // One proportion vector per client; empty means uniform over classes.
  std::vector<std::vector<double>> class_skew;
  std::uint64_t seed = 0;
};

// Exact per-class sample counts a client receives under the plan (largest
// remainder rounding, ties to the lower class index).
std::vector<std::size_t> class_targets(std::size_t size, std::span<const double> proportions);

/// Disjoint split of `pool` honoring the sizes and class proportions of the
/// plan. Throws PartitionError naming the first class the pool cannot cover,
/// or ConfigError when the plan itself is malformed.
std::vector<model::Dataset> partition(const model::Dataset& pool, const PartitionPlan& plan);

struct LabelFlip {
  std::string client_id;
  double fraction = 1.0;
  std::uint32_t from_class = 0;
  std::uint32_t to_class = 1;
};

struct SlowClient {
  std::string client_id;
  std::int64_t extra_delay_ms = 0;
  double delay_multiplier = 1.0;  // applied to the declared epoch cost
};

struct Crash {
  std::string client_id;
  int at_round = 1;
};

struct FaultSpec {
  std::optional<LabelFlip> label_flip;
  std::optional<SlowClient> slow_client;
  std::optional<Crash> crash;

  bool empty() const { return !label_flip && !slow_client && !crash; }
};

// Problems with `spec` given the client ids and round count.
std::vector<std::string> fault_problems(const FaultSpec& spec, std::span<const std::string> client_ids,
                                        int fusion_times, std::size_t class_count);

struct FaultedClients {
  std::vector<model::Dataset> datasets;
  std::vector<TrainerHandle> trainers;
  // Round at which each client's agent terminates, if any.
  std::vector<std::optional<int>> crash_round;
};

/// Applies label-flip, slow-client and crash faults to the named client only.
/// The flipped rows are a seeded choice of round(fraction x count) rows of the
/// source class.
FaultedClients apply_faults(std::vector<model::Dataset> datasets, std::vector<TrainerHandle> trainers,
                            std::span<const std::string> client_ids, const FaultSpec& spec,
                            std::uint64_t seed);

// DFDS fixture: "DFDS" | version u32 | samples u64 | dim u32 | classes u32 |
// features f64 row-major | labels u16. Big-endian throughout.
std::vector<std::uint8_t> encode_dataset(const model::Dataset& data);
model::Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void write_dataset(const std::filesystem::path& path, const model::Dataset& data);
model::Dataset read_dataset(const std::filesystem::path& path);

}  // namespace dynfed::train
