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

#include "dynfed/protocol/messages.hpp"

#include "dynfed/errors.hpp"

namespace dynfed::protocol {

std::string_view to_string(JobMode v) { return v == JobMode::kDefault ? "D_FL" : "DF_FL"; }
std::string_view to_string(DeadlinePolicy v) { return v == DeadlinePolicy::kGlobal ? "global" : "per-client"; }
std::string_view to_string(ParticipationPolicy v) {
  return v == ParticipationPolicy::kGlobalMax ? "global-max" : "local-previous";
}
std::string_view to_string(DispatchPolicy v) { return v == DispatchPolicy::kAll ? "all" : "participants-only"; }

namespace {
[[noreturn]] void bad_value(std::string_view field, std::string_view text, std::string_view allowed) {
  throw ConfigError({std::string(field) + ": '" + std::string(text) + "' is not one of " + std::string(allowed)});
}
}  // namespace

JobMode parse_job_mode(std::string_view text, std::string_view field) {
  if (text == "D_FL") return JobMode::kDefault;
  if (text == "DF_FL") return JobMode::kDynamicFusion;
  bad_value(field, text, "D_FL, DF_FL");
}

DeadlinePolicy parse_deadline_policy(std::string_view text, std::string_view field) {
  if (text == "global") return DeadlinePolicy::kGlobal;
  if (text == "per-client") return DeadlinePolicy::kPerClient;
  bad_value(field, text, "global, per-client");
}

ParticipationPolicy parse_participation_policy(std::string_view text, std::string_view field) {
  if (text == "global-max") return ParticipationPolicy::kGlobalMax;
  if (text == "local-previous") return ParticipationPolicy::kLocalPrevious;
  bad_value(field, text, "global-max, local-previous");
}

DispatchPolicy parse_dispatch_policy(std::string_view text, std::string_view field) {
  if (text == "all") return DispatchPolicy::kAll;
  if (text == "participants-only") return DispatchPolicy::kParticipantsOnly;
  bad_value(field, text, "all, participants-only");
}

std::string_view type_name(const Body& body) {
  struct Namer {
    std::string_view operator()(const RegisterClient&) const { return "register_client"; }
    std::string_view operator()(const JobDownloadRequest&) const { return "job_download_request"; }
    std::string_view operator()(const JobPayload&) const { return "job_payload"; }
    std::string_view operator()(const TrainingTimeReport&) const { return "training_time_report"; }
    std::string_view operator()(const MaxAccRequest&) const { return "max_acc_request"; }
    std::string_view operator()(const MaxAccReply&) const { return "max_acc_reply"; }
    std::string_view operator()(const UploadRequest&) const { return "upload_request"; }
    std::string_view operator()(const UploadAccept&) const { return "upload_accept"; }
    std::string_view operator()(const UploadReject&) const { return "upload_reject"; }
    std::string_view operator()(const ModelUpload&) const { return "model_upload"; }
    std::string_view operator()(const GlobalModelDispatch&) const { return "global_model_dispatch"; }
    std::string_view operator()(const JobComplete&) const { return "job_complete"; }
  };
  return std::visit(Namer{}, body);
}

}  // namespace dynfed::protocol
