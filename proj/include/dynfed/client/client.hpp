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
#include <optional>
#include <string>
#include <vector>

#include "dynfed/model/dataset.hpp"
#include "dynfed/model/parameter_vector.hpp"
#include "dynfed/net/transport.hpp"
#include "dynfed/protocol/messages.hpp"
#include "dynfed/train/trainer.hpp"

namespace dynfed::client {

struct ClientConfig {
  std::string client_id;
  std::string server_id = "server";
  train::TrainerHandle trainer;
  // The agent terminates halfway through training the round it reaches at
  // or after this round number.
  std::optional<int> crash_round;
};

struct ClientState {
  std::string client_id;
  int fed_step = 0;
  model::ParameterVector model;
  train::TrainerHandle trainer;
  model::Dataset local_data;
  model::Dataset validation_data;
  double last_local_acc = 0.0;
  std::uint64_t rng_seed = 0;
};

// What the client observed and decided in one round.
struct ClientRoundLog {
  int round = 0;
  std::int64_t training_time_ms = 0;
  double local_acc = 0.0;
  std::optional<double> max_acc_seen;
  bool requested_upload = false;
  bool uploaded = false;
  bool rejected = false;
  bool training_failed = false;
};

enum class ClientStatus { kStarting, kIdle, kTraining, kAwaitingMaxAcc, kAwaitingAccept, kDone, kCrashed, kFailed };

/// The client half of the protocol as an event-driven agent.
///
/// On each GlobalModelDispatch the client adopts the model (subject to the
/// dispatch policy), trains for the job's epochs, reports its training time,
/// asks for MaxAcc and uploads only when the participation gate passes:
/// UploadRequest first, ModelUpload after UploadAccept. Skipping sends
/// nothing. A dispatch that arrives mid-round is held and started once the
/// current round's exchange is over; only the newest one is kept.
class ClientAgent final : public net::Agent {
 public:
  // Maps the job's validation_ref to the shared validation set.
  using ValidationResolver = std::function<model::Dataset(const std::string&)>;

  ClientAgent(ClientConfig config, model::Dataset local_data, ValidationResolver resolver, net::AgentContext& ctx);

  void on_start() override;
  void on_message(const std::string& from, const protocol::Message& msg, const net::DeliveryInfo& info) override;
  void on_timer(net::TimerId id) override;
  void on_peer_lost(const std::string& peer) override;

  ClientStatus status() const { return status_; }
  bool finished() const {
    return status_ == ClientStatus::kDone || status_ == ClientStatus::kCrashed || status_ == ClientStatus::kFailed;
  }
  const ClientState& state() const { return state_; }
  const std::optional<protocol::TrainingJob>& job() const { return job_; }
  const std::vector<ClientRoundLog>& history() const { return history_; }

 private:
  void begin_round(const protocol::GlobalModelDispatch& dispatch);
  void finish_training();
  void end_round();
  void send(protocol::Body body);

  ClientConfig config_;
  ValidationResolver resolver_;
  net::AgentContext& ctx_;
  ClientState state_;
  std::optional<protocol::TrainingJob> job_;
  ClientStatus status_ = ClientStatus::kStarting;
  std::optional<protocol::GlobalModelDispatch> pending_;
  int round_ = 0;
  bool uploaded_last_round_ = true;
  model::ParameterVector trained_;
  std::uint64_t sample_count_ = 0;
  net::TimerId training_timer_ = 0;
  net::TimerId crash_timer_ = 0;
  std::vector<ClientRoundLog> history_;
};

}  // namespace dynfed::client
