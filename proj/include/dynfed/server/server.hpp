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
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dynfed/model/dataset.hpp"
#include "dynfed/model/fedavg.hpp"
#include "dynfed/model/parameter_vector.hpp"
#include "dynfed/net/transport.hpp"
#include "dynfed/protocol/decisions.hpp"
#include "dynfed/protocol/messages.hpp"

namespace dynfed::server {

// Inputs for job creation; the experiment config maps onto this.
struct JobConfig {
  std::string job_id = "job-0";
  int rounds = 30;
  int epochs = 90;
  double lr = 0.1;
  std::size_t batch_size = 32;
  model::ModelSpec model_spec;
  std::int64_t initial_waiting_time_ms = 9000;
  protocol::JobMode mode = protocol::JobMode::kDynamicFusion;
  protocol::ParticipationPolicy participation = protocol::ParticipationPolicy::kGlobalMax;
  protocol::DispatchPolicy dispatch = protocol::DispatchPolicy::kAll;
  std::string validation_ref = "memory:validation";
  std::uint64_t init_seed = 0;
};

/// Builds the immutable training job with a freshly initialized model.
/// Throws ConfigError listing every offending field.
protocol::TrainingJob create_job(const JobConfig& config);

struct ServerOptions {
  std::size_t expected_clients = 3;
  double slack = 1.2;
  protocol::DeadlinePolicy deadline = protocol::DeadlinePolicy::kGlobal;
  model::AggregationMode aggregation = model::AggregationMode::kUnweighted;
  // D_FL has no deadline; this caps a round if a client hangs without
  // disconnecting.
  std::int64_t default_round_timeout_ms = 3'600'000;
};

struct ModelUpdate {
  model::ParameterVector params;
  std::uint64_t sample_count = 0;
  double local_acc = 0.0;
  std::int64_t training_time_ms = 0;
};

struct RoundState {
  int round = 0;
  net::SimTime started_at = 0;
  net::SimTime deadline = 0;  // latest deadline in effect this round
  std::map<std::string, net::SimTime> client_deadlines;
  std::map<std::string, std::int64_t> training_time_reports;
  std::map<std::string, double> upload_requests;
  std::map<std::string, ModelUpdate> received_updates;
  std::map<std::string, net::SimTime> arrivals;
  std::set<std::string> max_acc_answered;
  bool open = false;
};

struct ClientRoundRecord {
  bool trained = false;
  std::int64_t training_time_ms = 0;
  std::optional<double> local_acc;
  bool uploaded = false;
  bool late = false;

  bool operator==(const ClientRoundRecord&) const = default;
};

struct MetricsRecord {
  int round = 0;
  protocol::JobMode mode = protocol::JobMode::kDynamicFusion;
  std::map<std::string, ClientRoundRecord> clients;
  std::size_t participants = 0;
  std::size_t skipped = 0;
  std::size_t late = 0;
  std::size_t uploads = 0;
  std::uint64_t upload_bytes = 0;
  std::int64_t sim_upload_time_ms = 0;
  std::uint64_t download_bytes = 0;
  std::int64_t waiting_time_ms = 0;
  net::SimTime started_at = 0;
  net::SimTime closed_at = 0;
  double global_acc = 0.0;
  bool aggregated = false;

  bool operator==(const MetricsRecord&) const = default;
};

struct ServerState {
  protocol::TrainingJob job;
  model::ParameterVector global_model;
  double max_acc = 0.0;
  int current_round = 0;  // completed rounds
  std::int64_t waiting_time_ms = 0;
  std::map<std::string, std::int64_t> client_waiting_ms;  // per-client deadline policy
  RoundState round;
  std::set<std::string> registry;
  std::set<std::string> downloaded;
  std::set<std::string> failed;
  std::vector<protocol::RoundOutcome> outcomes;
  std::vector<MetricsRecord> metrics;
};

struct ReportTotals {
  std::size_t rounds = 0;
  std::size_t aggregated_rounds = 0;
  std::size_t uploads = 0;
  std::uint64_t upload_bytes = 0;
  std::int64_t sim_upload_time_ms = 0;
  std::uint64_t download_bytes = 0;
  std::int64_t total_time_ms = 0;  // start of round 1 to close of the last round
  double mean_round_time_ms = 0.0;
  double final_acc = 0.0;
};

struct ExperimentReport {
  std::string job_id;
  protocol::JobMode mode = protocol::JobMode::kDynamicFusion;
  std::vector<protocol::RoundOutcome> outcomes;
  std::vector<MetricsRecord> metrics;
  ReportTotals totals;
  model::ParameterVector final_model;
  std::vector<std::uint8_t> final_model_bytes;
};

/// Central server for one training job.
///
/// Round r starts once every expected client has downloaded the job: the
/// global model is dispatched, then training-time reports, MaxAcc requests,
/// upload requests and model uploads are collected. In DF_FL the round closes
/// at its deadline (start + waiting time); in D_FL it closes when every live
/// client has uploaded. Closing selects participants, averages their models,
/// re-evaluates MaxAcc on the validation set and derives the next waiting
/// time. After fusion_times rounds every client receives JobComplete.
///
/// All state changes happen inside the Agent callbacks, which the runtime
/// invokes from a single thread.
class Server final : public net::Agent {
 public:
  Server(protocol::TrainingJob job, model::Dataset validation, ServerOptions options, net::AgentContext& ctx);

  void on_start() override {}
  void on_message(const std::string& from, const protocol::Message& msg, const net::DeliveryInfo& info) override;
  void on_timer(net::TimerId id) override;
  void on_peer_lost(const std::string& peer) override;

  bool finished() const { return finished_; }
  const ServerState& state() const { return state_; }
  const std::vector<std::string>& protocol_errors() const { return protocol_errors_; }

  // Called after each round closes (and once more when the job completes).
  std::function<void(const protocol::RoundOutcome&)> on_round_closed;
  std::function<void()> on_finished;

  // Requires finished(); throws PreconditionError otherwise.
  ExperimentReport finalize() const;

 private:
  void handle(const std::string& from, const protocol::RegisterClient& m);
  void handle(const std::string& from, const protocol::JobDownloadRequest& m);
  void handle(const std::string& from, const protocol::TrainingTimeReport& m);
  void handle(const std::string& from, const protocol::MaxAccRequest& m);
  void handle(const std::string& from, const protocol::UploadRequest& m);
  void handle(const std::string& from, const protocol::ModelUpload& m, const net::DeliveryInfo& info);

  void maybe_start();
  void start_round();
  void close_round();
  void maybe_close_default_round();
  net::SimTime deadline_for(const std::string& client) const;
  MetricsRecord& metrics_for(int round);
  void protocol_error(const std::string& what);
  void send(const std::string& to, protocol::Body body);

  model::Dataset validation_;
  ServerOptions options_;
  net::AgentContext& ctx_;
  ServerState state_;
  net::TimerId round_timer_ = 0;
  bool started_ = false;
  bool finished_ = false;
  std::vector<std::string> protocol_errors_;
};

}  // namespace dynfed::server
