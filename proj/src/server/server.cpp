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

#include "dynfed/server/server.hpp"

#include <algorithm>

#include "dynfed/errors.hpp"
#include "dynfed/log.hpp"
#include "dynfed/model/evaluate.hpp"
#include "dynfed/model/serialize.hpp"

namespace dynfed::server {

using protocol::JobMode;

protocol::TrainingJob create_job(const JobConfig& config) {
  std::vector<std::string> problems;
  if (config.rounds < 1) problems.emplace_back("rounds: must be at least 1");
  if (config.epochs < 1) problems.emplace_back("epochs: must be at least 1");
  if (!(config.lr > 0.0)) problems.emplace_back("lr: must be positive");
  if (config.batch_size < 1) problems.emplace_back("batch_size: must be at least 1");
  if (config.initial_waiting_time_ms <= 0) problems.emplace_back("initial_waiting_time_ms: must be positive");
  if (config.job_id.empty()) problems.emplace_back("job_id: must not be empty");
  auto spec_problems = config.model_spec.problems();
  problems.insert(problems.end(), spec_problems.begin(), spec_problems.end());
  if (!problems.empty()) throw ConfigError(std::move(problems));

  protocol::TrainingJob job;
  job.job_id = config.job_id;
  job.fusion_times = config.rounds;
  job.model_spec = config.model_spec;
  job.initial_model = config.model_spec.initialize(config.init_seed);
  job.hyperparameters = {config.lr, config.batch_size, config.epochs};
  job.initial_waiting_time_ms = config.initial_waiting_time_ms;
  job.mode = config.mode;
  job.participation = config.participation;
  job.dispatch = config.dispatch;
  job.validation_ref = config.validation_ref;
  return job;
}

Server::Server(protocol::TrainingJob job, model::Dataset validation, ServerOptions options, net::AgentContext& ctx)
    : validation_(std::move(validation)), options_(options), ctx_(ctx) {
  if (job.fusion_times < 1 || job.initial_waiting_time_ms <= 0) {
    throw PreconditionError("job needs at least one round and a positive waiting time");
  }
  if (validation_.dim() != job.model_spec.input_dim || validation_.class_count() != job.model_spec.class_count ||
      validation_.empty()) {
    throw PreconditionError("validation set does not match the job's model");
  }
  if (!(options_.slack >= 1.0)) throw PreconditionError("slack must be at least 1.0");
  state_.global_model = job.initial_model;
  state_.waiting_time_ms = job.initial_waiting_time_ms;
  state_.job = std::move(job);
}

void Server::protocol_error(const std::string& what) {
  log::warn("protocol error: " + what);
  protocol_errors_.push_back(what);
}

void Server::send(const std::string& to, protocol::Body body) {
  try {
    ctx_.send(to, protocol::Message{state_.job.job_id, std::move(body)});
  } catch (const TransportError& e) {
    log::warn("cannot reach " + to + ": " + e.what());
    on_peer_lost(to);
  }
}

void Server::on_message(const std::string& from, const protocol::Message& msg, const net::DeliveryInfo& info) {
  if (!msg.job_id.empty() && msg.job_id != state_.job.job_id) {
    protocol_error("message for job '" + msg.job_id + "' from " + from);
    return;
  }
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, protocol::ModelUpload>) {
          handle(from, body, info);
        } else if constexpr (std::is_same_v<T, protocol::RegisterClient> ||
                             std::is_same_v<T, protocol::JobDownloadRequest> ||
                             std::is_same_v<T, protocol::TrainingTimeReport> ||
                             std::is_same_v<T, protocol::MaxAccRequest> ||
                             std::is_same_v<T, protocol::UploadRequest>) {
          handle(from, body);
        } else {
          protocol_error("unexpected " + std::string(protocol::type_name(msg)) + " from " + from);
        }
      },
      msg.body);
}

void Server::handle(const std::string& from, const protocol::RegisterClient& m) {
  if (m.client_id != from) {
    protocol_error("client '" + from + "' registered as '" + m.client_id + "'");
    return;
  }
  if (state_.registry.contains(from)) return;
  if (started_ || state_.registry.size() >= options_.expected_clients) {
    protocol_error("registration from '" + from + "' after the registry closed");
    return;
  }
  state_.registry.insert(from);
}

void Server::handle(const std::string& from, const protocol::JobDownloadRequest& /*m*/) {
  if (!state_.registry.contains(from)) {
    protocol_error("job download by unregistered client '" + from + "'");
    return;
  }
  send(from, protocol::JobPayload{state_.job});
  state_.downloaded.insert(from);
  maybe_start();
}

void Server::maybe_start() {
  if (started_ || state_.registry.size() < options_.expected_clients ||
      state_.downloaded.size() < state_.registry.size()) {
    return;
  }
  started_ = true;
  start_round();
}

net::SimTime Server::deadline_for(const std::string& client) const {
  const auto it = state_.round.client_deadlines.find(client);
  return it == state_.round.client_deadlines.end() ? state_.round.deadline : it->second;
}

MetricsRecord& Server::metrics_for(int round) { return state_.metrics.at(static_cast<std::size_t>(round - 1)); }

void Server::start_round() {
  const net::SimTime now = ctx_.now();
  RoundState round;
  round.round = state_.current_round + 1;
  round.started_at = now;
  round.open = true;
  if (options_.deadline == protocol::DeadlinePolicy::kPerClient) {
    for (const auto& c : state_.registry) {
      const auto it = state_.client_waiting_ms.find(c);
      const auto wait = it == state_.client_waiting_ms.end() ? state_.job.initial_waiting_time_ms : it->second;
      round.client_deadlines[c] = now + wait;
      round.deadline = std::max(round.deadline, now + wait);
    }
  } else {
    round.deadline = now + state_.waiting_time_ms;
  }
  state_.round = std::move(round);

  MetricsRecord record;
  record.round = state_.round.round;
  record.mode = state_.job.mode;
  record.started_at = now;
  record.waiting_time_ms = state_.round.deadline - now;
  for (const auto& c : state_.registry) record.clients[c] = ClientRoundRecord{};

  auto frame = net::make_frame(protocol::Message{
      state_.job.job_id,
      protocol::GlobalModelDispatch{state_.round.round, model::serialize_params(state_.global_model),
                                    state_.max_acc}});
  std::vector<std::string> live;
  for (const auto& c : state_.registry) {
    if (!state_.failed.contains(c)) live.push_back(c);
  }
  state_.metrics.push_back(std::move(record));
  for (const auto& c : live) {
    metrics_for(state_.round.round).download_bytes += frame->size();
    try {
      ctx_.send_frame(c, frame, "global_model_dispatch");
    } catch (const TransportError& e) {
      log::warn("cannot dispatch to " + c + ": " + e.what());
      state_.failed.insert(c);
    }
  }

  if (state_.job.mode == JobMode::kDynamicFusion) {
    round_timer_ = ctx_.set_timer(state_.round.deadline - now);
  } else {
    const bool anyone_alive = std::any_of(state_.registry.begin(), state_.registry.end(),
                                          [&](const auto& c) { return !state_.failed.contains(c); });
    round_timer_ = ctx_.set_timer(anyone_alive ? options_.default_round_timeout_ms : 0);
  }
}

void Server::handle(const std::string& from, const protocol::TrainingTimeReport& m) {
  if (m.client_id != from || m.round < 1 || m.round > static_cast<int>(state_.metrics.size())) {
    protocol_error("bad training time report from '" + from + "'");
    return;
  }
  auto& rec = metrics_for(m.round).clients[from];
  rec.trained = true;
  rec.training_time_ms = m.training_time_ms;
  if (state_.round.open && m.round == state_.round.round) state_.round.training_time_reports[from] = m.training_time_ms;
}

void Server::handle(const std::string& from, const protocol::MaxAccRequest& m) {
  if (m.client_id != from) {
    protocol_error("MaxAcc request from '" + from + "' names '" + m.client_id + "'");
    return;
  }
  if (state_.round.open && m.round == state_.round.round) state_.round.max_acc_answered.insert(from);
  send(from, protocol::MaxAccReply{m.round, state_.max_acc});
}

void Server::handle(const std::string& from, const protocol::UploadRequest& m) {
  if (m.client_id != from || m.round < 1 || m.round > static_cast<int>(state_.metrics.size())) {
    protocol_error("bad upload request from '" + from + "'");
    return;
  }
  metrics_for(m.round).clients[from].local_acc = m.local_acc;
  auto& round = state_.round;
  std::string reason;
  if (!round.open || m.round != round.round) {
    reason = "round closed";
  } else if (round.upload_requests.contains(from)) {
    reason = "duplicate request";
  } else if (state_.job.mode == JobMode::kDynamicFusion && ctx_.now() > deadline_for(from)) {
    reason = "past deadline";
  }
  if (!reason.empty()) {
    send(from, protocol::UploadReject{m.round, reason});
    return;
  }
  round.upload_requests[from] = m.local_acc;
  send(from, protocol::UploadAccept{m.round});
}

void Server::handle(const std::string& from, const protocol::ModelUpload& m, const net::DeliveryInfo& info) {
  if (m.client_id != from || m.round < 1 || m.round > static_cast<int>(state_.metrics.size())) {
    protocol_error("bad model upload from '" + from + "'");
    return;
  }
  auto& record = metrics_for(m.round);
  auto& client = record.clients[from];
  if (client.uploaded) {
    protocol_error("duplicate upload from '" + from + "' in round " + std::to_string(m.round) + "; first kept");
    return;
  }
  client.uploaded = true;
  ++record.uploads;
  record.upload_bytes += info.bytes;
  record.sim_upload_time_ms += info.transfer_ms;

  auto& round = state_.round;
  if (!round.open || m.round != round.round) return;  // arrived after its round closed
  if (!round.upload_requests.contains(from)) {
    protocol_error("upload from '" + from + "' without an accepted request");
    return;
  }
  if (m.sample_count == 0) {
    protocol_error("upload from '" + from + "' reports zero samples");
    return;
  }
  model::ParameterVector params;
  try {
    params = model::deserialize_params(m.params);
  } catch (const DecodeError& e) {
    protocol_error("undecodable model from '" + from + "': " + e.what());
    return;
  }
  if (params.layout() != state_.global_model.layout()) {
    protocol_error("model from '" + from + "' has a different layout");
    return;
  }
  round.received_updates[from] = ModelUpdate{std::move(params), m.sample_count, m.local_acc, m.training_time_ms};
  round.arrivals[from] = ctx_.now();
  if (state_.job.mode == JobMode::kDefault) maybe_close_default_round();
}

void Server::maybe_close_default_round() {
  if (!state_.round.open) return;
  for (const auto& c : state_.registry) {
    if (!state_.failed.contains(c) && !state_.round.received_updates.contains(c)) return;
  }
  close_round();
}

void Server::on_timer(net::TimerId id) {
  if (id == round_timer_ && state_.round.open) close_round();
}

void Server::on_peer_lost(const std::string& peer) {
  if (!state_.registry.contains(peer) || state_.failed.contains(peer)) return;
  log::info("lost connection to " + peer);
  state_.failed.insert(peer);
  if (state_.job.mode == JobMode::kDefault) maybe_close_default_round();
}

void Server::close_round() {
  auto& round = state_.round;
  round.open = false;
  const bool dynamic = state_.job.mode == JobMode::kDynamicFusion;

  std::vector<protocol::UploadArrival> arrivals;
  for (const auto& [client, at] : round.arrivals) arrivals.push_back({client, at});
  const auto selection = dynamic ? protocol::select_participants(arrivals, round.client_deadlines, round.deadline)
                                 : protocol::select_participants(arrivals, ctx_.now());

  protocol::RoundOutcome outcome;
  outcome.round = round.round;
  outcome.participants = selection.participants;
  outcome.excluded_late = selection.excluded_late;
  for (const auto& c : state_.registry) {
    if (outcome.participants.contains(c) || outcome.excluded_late.contains(c)) continue;
    const bool chose_to_skip = dynamic && round.max_acc_answered.contains(c) && !round.upload_requests.contains(c);
    (chose_to_skip ? outcome.skipped_by_choice : outcome.excluded_late).insert(c);
  }
  outcome.aggregated = !outcome.participants.empty();

  std::vector<std::int64_t> reports;
  for (const auto& c : outcome.participants) {
    const auto it = round.training_time_reports.find(c);
    const std::int64_t t = it != round.training_time_reports.end() ? it->second
                                                                   : round.received_updates.at(c).training_time_ms;
    reports.push_back(t);
    if (options_.deadline == protocol::DeadlinePolicy::kPerClient) {
      const auto prev = state_.client_waiting_ms.contains(c) ? state_.client_waiting_ms.at(c)
                                                             : state_.job.initial_waiting_time_ms;
      const std::int64_t own[] = {t};
      state_.client_waiting_ms[c] = protocol::update_waiting_time(prev, own, options_.slack);
    }
  }

  if (outcome.aggregated) {
    std::vector<model::Contribution> contributions;
    for (const auto& c : outcome.participants) {
      const auto& u = round.received_updates.at(c);
      contributions.push_back({&u.params, u.sample_count});
    }
    state_.global_model = model::fedavg(contributions, options_.aggregation);
    state_.max_acc = model::evaluate(state_.global_model, state_.job.model_spec, validation_);
  }
  state_.waiting_time_ms = protocol::update_waiting_time(state_.waiting_time_ms, reports, options_.slack);

  auto& record = metrics_for(round.round);
  record.closed_at = ctx_.now();
  record.participants = outcome.participants.size();
  record.skipped = outcome.skipped_by_choice.size();
  record.late = outcome.excluded_late.size();
  record.global_acc = state_.max_acc;
  record.aggregated = outcome.aggregated;
  for (const auto& c : outcome.excluded_late) record.clients[c].late = true;

  state_.outcomes.push_back(outcome);
  ++state_.current_round;
  if (on_round_closed) on_round_closed(outcome);

  if (state_.current_round >= state_.job.fusion_times) {
    finished_ = true;
    for (const auto& c : state_.registry) {
      if (!state_.failed.contains(c)) send(c, protocol::JobComplete{state_.current_round});
    }
    if (on_finished) on_finished();
    return;
  }
  start_round();
}

ExperimentReport Server::finalize() const {
  if (!finished_) throw PreconditionError("finalize before all rounds completed");
  ExperimentReport report;
  report.job_id = state_.job.job_id;
  report.mode = state_.job.mode;
  report.outcomes = state_.outcomes;
  report.metrics = state_.metrics;
  report.final_model = state_.global_model;
  report.final_model_bytes = model::serialize_params(state_.global_model);

  auto& t = report.totals;
  t.rounds = report.metrics.size();
  double round_time_sum = 0.0;
  for (const auto& m : report.metrics) {
    t.aggregated_rounds += m.aggregated ? 1 : 0;
    t.uploads += m.uploads;
    t.upload_bytes += m.upload_bytes;
    t.sim_upload_time_ms += m.sim_upload_time_ms;
    t.download_bytes += m.download_bytes;
    round_time_sum += static_cast<double>(m.closed_at - m.started_at);
  }
  if (!report.metrics.empty()) {
    t.total_time_ms = report.metrics.back().closed_at - report.metrics.front().started_at;
    t.mean_round_time_ms = round_time_sum / static_cast<double>(report.metrics.size());
  }
  t.final_acc = state_.max_acc;
  return report;
}

}  // namespace dynfed::server
