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
#include <map>
#include <set>
#include <span>
#include <string>

#include "dynfed/protocol/messages.hpp"

namespace dynfed::protocol {

// The client participation gate. In D_FL every round uploads; in DF_FL a
// client uploads when its accuracy reaches the current best (ties upload).
bool should_upload(double local_acc, double max_acc, JobMode mode);

/// Next aggregation waiting time: slack x mean of the previous round's
/// participant training times, rounded up to whole milliseconds. With no
/// reports the previous waiting time is kept.
std::int64_t update_waiting_time(std::int64_t previous_waiting_ms, std::span<const std::int64_t> reports_ms,
                                 double slack);

struct UploadArrival {
  std::string client_id;
  std::int64_t at_ms = 0;  // completion time of the ModelUpload
};

struct Selection {
  std::set<std::string> participants;
  std::set<std::string> excluded_late;
};

// Arrivals at or before the deadline participate; later ones are excluded.
// Throws ProtocolError naming a client that appears twice.
Selection select_participants(std::span<const UploadArrival> arrivals, std::int64_t deadline_ms);
// Same, with a per-client deadline (falling back to `default_deadline_ms`).
Selection select_participants(std::span<const UploadArrival> arrivals,
                              const std::map<std::string, std::int64_t>& deadlines_ms,
                              std::int64_t default_deadline_ms);

struct RoundOutcome {
  int round = 0;
  std::set<std::string> participants;
  std::set<std::string> excluded_late;
  std::set<std::string> skipped_by_choice;
  bool aggregated = false;

  bool operator==(const RoundOutcome&) const = default;

  // Pairwise disjoint, covering `registered`, aggregated iff participants.
  bool consistent_with(const std::set<std::string>& registered) const;
};

}  // namespace dynfed::protocol
