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

#include "dynfed/protocol/decisions.hpp"

#include <cmath>

#include "dynfed/errors.hpp"

namespace dynfed::protocol {

bool should_upload(double local_acc, double max_acc, JobMode mode) {
  if (!(local_acc >= 0.0 && local_acc <= 1.0) || !(max_acc >= 0.0 && max_acc <= 1.0)) {
    throw PreconditionError("accuracies must lie in [0, 1]");
  }
  if (mode == JobMode::kDefault) return true;
  return local_acc >= max_acc;
}

std::int64_t update_waiting_time(std::int64_t previous_waiting_ms, std::span<const std::int64_t> reports_ms,
                                 double slack) {
  if (!(slack >= 1.0)) throw PreconditionError("slack must be at least 1.0");
  if (reports_ms.empty()) return previous_waiting_ms;
  long double sum = 0;
  for (auto r : reports_ms) sum += static_cast<long double>(r);
  const long double scaled = static_cast<long double>(slack) * (sum / static_cast<long double>(reports_ms.size()));
  // Round up, ignoring sub-microsecond residue from the binary slack factor
  // (1.2 x 4600 must give 5520, not 5521).
  return static_cast<std::int64_t>(std::ceil(scaled - 1e-6L));
}

Selection select_participants(std::span<const UploadArrival> arrivals, std::int64_t deadline_ms) {
  return select_participants(arrivals, {}, deadline_ms);
}

Selection select_participants(std::span<const UploadArrival> arrivals,
                              const std::map<std::string, std::int64_t>& deadlines_ms,
                              std::int64_t default_deadline_ms) {
  Selection out;
  std::set<std::string> seen;
  for (const auto& a : arrivals) {
    if (!seen.insert(a.client_id).second) {
      throw ProtocolError("duplicate upload from client '" + a.client_id + "'");
    }
    const auto it = deadlines_ms.find(a.client_id);
    const std::int64_t deadline = it == deadlines_ms.end() ? default_deadline_ms : it->second;
    (a.at_ms <= deadline ? out.participants : out.excluded_late).insert(a.client_id);
  }
  return out;
}

bool RoundOutcome::consistent_with(const std::set<std::string>& registered) const {
  std::size_t total = 0;
  for (const auto* group : {&participants, &excluded_late, &skipped_by_choice}) {
    for (const auto& id : *group) {
      if (!registered.contains(id)) return false;
    }
    total += group->size();
  }
  std::set<std::string> all = participants;
  all.insert(excluded_late.begin(), excluded_late.end());
  all.insert(skipped_by_choice.begin(), skipped_by_choice.end());
  return all.size() == total && all == registered && aggregated == !participants.empty();
}

}  // namespace dynfed::protocol
