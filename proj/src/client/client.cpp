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

#include "dynfed/client/client.hpp"

#include <chrono>

#include "dynfed/errors.hpp"
#include "dynfed/log.hpp"
#include "dynfed/model/evaluate.hpp"
#include "dynfed/model/serialize.hpp"
#include "dynfed/protocol/decisions.hpp"
#include "dynfed/rng.hpp"

namespace dynfed::client {

ClientAgent::ClientAgent(ClientConfig config, model::Dataset local_data, ValidationResolver resolver,
                         net::AgentContext& ctx)
    : config_(std::move(config)), resolver_(std::move(resolver)), ctx_(ctx) {
  if (config_.client_id.empty()) throw PreconditionError("client id must not be empty");
  if (local_data.empty()) throw PreconditionError("client '" + config_.client_id + "' has no local data");
  if (config_.trainer.epoch_cost_ms <= 0) throw PreconditionError("declared epoch cost must be positive");
  state_.client_id = config_.client_id;
  state_.trainer = config_.trainer;
  state_.rng_seed = config_.trainer.seed;
  sample_count_ = local_data.size();
  state_.local_data = std::move(local_data);
}

void ClientAgent::send(protocol::Body body) {
  const std::string job_id = job_ ? job_->job_id : std::string();
  ctx_.send(config_.server_id, protocol::Message{job_id, std::move(body)});
}

void ClientAgent::on_start() {
  send(protocol::RegisterClient{config_.client_id});
  send(protocol::JobDownloadRequest{config_.client_id});
}

void ClientAgent::on_message(const std::string& from, const protocol::Message& msg,
                             const net::DeliveryInfo& /*info*/) {
  if (finished() || from != config_.server_id) return;

  if (const auto* payload = std::get_if<protocol::JobPayload>(&msg.body)) {
    if (job_) return;
    job_ = payload->job;
    state_.model = job_->initial_model;
    state_.trainer.spec = job_->model_spec;
    state_.trainer.lr = job_->hyperparameters.lr;
    state_.trainer.batch_size = job_->hyperparameters.batch_size;
    state_.validation_data = resolver_(job_->validation_ref);
    status_ = ClientStatus::kIdle;
    if (pending_) {
      auto next = std::move(*pending_);
      pending_.reset();
      begin_round(next);
    }
    return;
  }
  if (const auto* dispatch = std::get_if<protocol::GlobalModelDispatch>(&msg.body)) {
    if (status_ == ClientStatus::kIdle) {
      begin_round(*dispatch);
    } else {
      pending_ = *dispatch;
    }
    return;
  }
  if (const auto* reply = std::get_if<protocol::MaxAccReply>(&msg.body)) {
    if (status_ != ClientStatus::kAwaitingMaxAcc || reply->round != round_) return;
    auto& log = history_.back();
    log.max_acc_seen = reply->max_acc;
    const double threshold =
        job_->participation == protocol::ParticipationPolicy::kGlobalMax ? reply->max_acc : state_.last_local_acc;
    const bool upload = protocol::should_upload(log.local_acc, threshold, job_->mode);
    state_.last_local_acc = log.local_acc;
    if (!upload) {
      end_round();
      return;
    }
    log.requested_upload = true;
    status_ = ClientStatus::kAwaitingAccept;
    send(protocol::UploadRequest{config_.client_id, round_, log.local_acc});
    return;
  }
  if (const auto* accept = std::get_if<protocol::UploadAccept>(&msg.body)) {
    if (status_ != ClientStatus::kAwaitingAccept || accept->round != round_) return;
    auto& log = history_.back();
    send(protocol::ModelUpload{config_.client_id, round_, model::serialize_params(state_.model), sample_count_,
                               log.local_acc, log.training_time_ms});
    log.uploaded = true;
    end_round();
    return;
  }
  if (const auto* reject = std::get_if<protocol::UploadReject>(&msg.body)) {
    if (status_ != ClientStatus::kAwaitingAccept || reject->round != round_) return;
    history_.back().rejected = true;
    log::debug(config_.client_id + " upload rejected in round " + std::to_string(round_) + ": " + reject->reason);
    end_round();
    return;
  }
  if (std::holds_alternative<protocol::JobComplete>(msg.body)) {
    state_.fed_step = job_ ? job_->fusion_times : state_.fed_step;
    status_ = ClientStatus::kDone;
    ctx_.terminate();
  }
}

void ClientAgent::begin_round(const protocol::GlobalModelDispatch& dispatch) {
  round_ = dispatch.round;
  const bool adopt = job_->dispatch == protocol::DispatchPolicy::kAll || uploaded_last_round_;
  if (adopt) state_.model = model::deserialize_params(dispatch.params);

  ClientRoundLog log;
  log.round = round_;
  const auto& hp = job_->hyperparameters;
  const auto wall_start = std::chrono::steady_clock::now();
  try {
    auto result = train::train_epochs(state_.model, job_->model_spec, state_.local_data, hp, hp.epochs,
                                      derive_seed(state_.rng_seed, static_cast<std::uint64_t>(round_)));
    trained_ = std::move(result.params);
    log.local_acc = model::evaluate(trained_, job_->model_spec, state_.validation_data);
  } catch (const TrainingError& e) {
    log::warn(config_.client_id + " round " + std::to_string(round_) + ": " + e.what());
    trained_ = state_.model;
    log.training_failed = true;
  }
  const auto wall_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - wall_start).count();
  // On real sockets an injected delay is slept off before reporting.
  const std::int64_t real_delay = ctx_.simulated() ? 0 : state_.trainer.extra_delay_ms;
  log.training_time_ms = ctx_.simulated() ? train::measure_training_time(state_.trainer, hp.epochs)
                                          : std::max<std::int64_t>(1, wall_ms + real_delay);
  history_.push_back(log);
  status_ = ClientStatus::kTraining;

  if (config_.crash_round && round_ >= *config_.crash_round) {
    crash_timer_ = ctx_.set_timer(ctx_.simulated() ? log.training_time_ms / 2 : 0);
  }
  training_timer_ = ctx_.set_timer(ctx_.simulated() ? log.training_time_ms : real_delay);
}

void ClientAgent::on_timer(net::TimerId id) {
  if (finished()) return;
  if (id == crash_timer_) {
    log::info(config_.client_id + " crashing in round " + std::to_string(round_));
    status_ = ClientStatus::kCrashed;
    ctx_.terminate();
    return;
  }
  if (id == training_timer_ && status_ == ClientStatus::kTraining) finish_training();
}

void ClientAgent::finish_training() {
  state_.model = trained_;
  const auto& log = history_.back();
  send(protocol::TrainingTimeReport{config_.client_id, round_, log.training_time_ms});
  if (log.training_failed) {
    end_round();
    return;
  }
  status_ = ClientStatus::kAwaitingMaxAcc;
  send(protocol::MaxAccRequest{config_.client_id, round_});
}

void ClientAgent::end_round() {
  state_.fed_step = std::max(state_.fed_step, round_);
  uploaded_last_round_ = history_.back().uploaded;
  status_ = ClientStatus::kIdle;
  if (pending_) {
    auto next = std::move(*pending_);
    pending_.reset();
    begin_round(next);
  }
}

void ClientAgent::on_peer_lost(const std::string& peer) {
  if (finished() || peer != config_.server_id) return;
  log::warn(config_.client_id + " lost the server connection");
  status_ = ClientStatus::kFailed;
  ctx_.terminate();
}

}  // namespace dynfed::client
