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
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dynfed/model/model_spec.hpp"
#include "dynfed/model/parameter_vector.hpp"
#include "dynfed/train/trainer.hpp"

namespace dynfed::protocol {

// D_FL uploads every round and waits for everyone; DF_FL gates uploads on
// accuracy and closes each round at a deadline.
enum class JobMode { kDefault, kDynamicFusion };
enum class DeadlinePolicy { kGlobal, kPerClient };
// Compare local accuracy with the server's MaxAcc, or with the client's own
// accuracy from its previous round.
enum class ParticipationPolicy { kGlobalMax, kLocalPrevious };
// Send each new global model to every client, or only to the round's participants.
enum class DispatchPolicy { kAll, kParticipantsOnly };

std::string_view to_string(JobMode v);
std::string_view to_string(DeadlinePolicy v);
std::string_view to_string(ParticipationPolicy v);
std::string_view to_string(DispatchPolicy v);
// Parsers throw ConfigError naming `field`.
JobMode parse_job_mode(std::string_view text, std::string_view field = "mode");
DeadlinePolicy parse_deadline_policy(std::string_view text, std::string_view field = "deadline_policy");
ParticipationPolicy parse_participation_policy(std::string_view text,
                                               std::string_view field = "participation_policy");
DispatchPolicy parse_dispatch_policy(std::string_view text, std::string_view field = "dispatch_policy");

struct TrainingJob {
  std::string job_id;
  int fusion_times = 1;
  model::ModelSpec model_spec;
  model::ParameterVector initial_model;
  train::Hyperparameters hyperparameters;
  std::int64_t initial_waiting_time_ms = 1;
  JobMode mode = JobMode::kDynamicFusion;
  ParticipationPolicy participation = ParticipationPolicy::kGlobalMax;
  DispatchPolicy dispatch = DispatchPolicy::kAll;
  // Where clients obtain the shared validation set ("memory:" in simulation,
  // a DFDS path otherwise). Datasets themselves never travel in messages.
  std::string validation_ref;

  bool operator==(const TrainingJob&) const = default;
};

struct RegisterClient {
  std::string client_id;
  bool operator==(const RegisterClient&) const = default;
};
struct JobDownloadRequest {
  std::string client_id;
  bool operator==(const JobDownloadRequest&) const = default;
};
struct JobPayload {
  TrainingJob job;
  bool operator==(const JobPayload&) const = default;
};
struct TrainingTimeReport {
  std::string client_id;
  int round = 0;
  std::int64_t training_time_ms = 0;
  bool operator==(const TrainingTimeReport&) const = default;
};
struct MaxAccRequest {
  std::string client_id;
  int round = 0;
  bool operator==(const MaxAccRequest&) const = default;
};
struct MaxAccReply {
  int round = 0;
  double max_acc = 0.0;
  bool operator==(const MaxAccReply&) const = default;
};
struct UploadRequest {
  std::string client_id;
  int round = 0;
  double local_acc = 0.0;
  bool operator==(const UploadRequest&) const = default;
};
struct UploadAccept {
  int round = 0;
  bool operator==(const UploadAccept&) const = default;
};
struct UploadReject {
  int round = 0;
  std::string reason;
  bool operator==(const UploadReject&) const = default;
};
struct ModelUpload {
  std::string client_id;
  int round = 0;
  std::vector<std::uint8_t> params;  // DFPV bytes
  std::uint64_t sample_count = 0;
  double local_acc = 0.0;
  std::int64_t training_time_ms = 0;
  bool operator==(const ModelUpload&) const = default;
};
struct GlobalModelDispatch {
  int round = 0;
  std::vector<std::uint8_t> params;  // DFPV bytes
  double max_acc = 0.0;
  bool operator==(const GlobalModelDispatch&) const = default;
};
struct JobComplete {
  int round = 0;
  bool operator==(const JobComplete&) const = default;
};

using Body = std::variant<RegisterClient, JobDownloadRequest, JobPayload, TrainingTimeReport, MaxAccRequest,
                          MaxAccReply, UploadRequest, UploadAccept, UploadReject, ModelUpload,
                          GlobalModelDispatch, JobComplete>;

struct Message {
  std::string job_id;
  Body body;

  bool operator==(const Message&) const = default;
};

// Wire name of the variant, e.g. "model_upload".
std::string_view type_name(const Body& body);
inline std::string_view type_name(const Message& msg) { return type_name(msg.body); }

}  // namespace dynfed::protocol
