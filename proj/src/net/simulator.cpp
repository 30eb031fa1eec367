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

#include "dynfed/net/simulator.hpp"

#include <json.hpp>

#include "dynfed/errors.hpp"
#include "dynfed/file_io.hpp"
#include "dynfed/log.hpp"
#include "dynfed/protocol/codec.hpp"

namespace dynfed::net {

Frame make_frame(const protocol::Message& msg) {
  return std::make_shared<const std::vector<std::uint8_t>>(protocol::frame_encode(msg));
}

std::int64_t transfer_time_ms(std::uint64_t bytes, std::int64_t bandwidth_bytes_per_s) {
  if (bandwidth_bytes_per_s <= 0) throw PreconditionError("bandwidth must be positive");
  const auto bw = static_cast<unsigned __int128>(bandwidth_bytes_per_s);
  const unsigned __int128 scaled = static_cast<unsigned __int128>(bytes) * 1000;
  return static_cast<std::int64_t>((scaled + bw - 1) / bw);
}

void AgentContext::send(const std::string& to, const protocol::Message& msg) {
  send_frame(to, make_frame(msg), protocol::type_name(msg));
}

std::string_view to_string(SimEventKind kind) {
  switch (kind) {
    case SimEventKind::kDeliverFrame: return "deliver-frame";
    case SimEventKind::kTimerExpiry: return "timer-expiry";
    case SimEventKind::kAgentWake: return "agent-wake";
    case SimEventKind::kLinkDown: return "link-down";
  }
  return "unknown";
}

class SimNetwork::NodeContext final : public AgentContext {
 public:
  NodeContext(SimNetwork& net, std::string id) : net_(net), id_(std::move(id)) {}

  SimTime now() const override { return net_.now(); }
  void send_frame(const std::string& to, Frame frame, std::string_view type) override {
    net_.send(id_, to, std::move(frame), type);
  }
  TimerId set_timer(std::int64_t delay_ms) override { return net_.schedule_timer(id_, net_.now() + delay_ms); }
  void terminate() override { net_.crash(id_); }
  bool simulated() const override { return true; }

 private:
  SimNetwork& net_;
  std::string id_;
};

SimNetwork::SimNetwork(std::optional<std::filesystem::path> trace_path) : trace_hash_(fnv1a64(std::string())) {
  if (trace_path) {
    if (trace_path->has_parent_path()) std::filesystem::create_directories(trace_path->parent_path());
    trace_.emplace(*trace_path, std::ios::trunc);
    if (!*trace_) throw Error("cannot write trace " + trace_path->string());
  }
}

SimNetwork::~SimNetwork() = default;

void SimNetwork::add_node(const std::string& id, Agent& agent) {
  add_node(id);
  attach(id, agent);
}

void SimNetwork::attach(const std::string& id, Agent& agent) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw PreconditionError("unknown node '" + id + "'");
  it->second.agent = &agent;
}

AgentContext& SimNetwork::add_node(const std::string& id) {
  if (nodes_.contains(id)) throw PreconditionError("node '" + id + "' already registered");
  Node node;
  node.context = std::make_unique<NodeContext>(*this, id);
  nodes_.emplace(id, std::move(node));
  SimEvent wake;
  wake.at = now_;
  wake.kind = SimEventKind::kAgentWake;
  wake.to = id;
  push(std::move(wake));
  return *nodes_.at(id).context;
}

void SimNetwork::connect(const std::string& a, const std::string& b, const LinkConfig& a_to_b,
                         const LinkConfig& b_to_a) {
  for (const auto* cfg : {&a_to_b, &b_to_a}) {
    if (cfg->bandwidth_bytes_per_s <= 0 || cfg->latency_ms < 0) {
      throw PreconditionError("link needs positive bandwidth and non-negative latency");
    }
  }
  links_[{a, b}] = Link{a_to_b, 0, {}};
  links_[{b, a}] = Link{b_to_a, 0, {}};
}

SimTime SimNetwork::send(const std::string& from, const std::string& to, Frame frame, std::string_view type) {
  if (!nodes_.contains(to)) throw TransportError("send to unregistered node '" + to + "'");
  const auto link_it = links_.find({from, to});
  if (link_it == links_.end()) throw TransportError("no link from '" + from + "' to '" + to + "'");
  const auto sender = nodes_.find(from);
  if (sender != nodes_.end() && !sender->second.alive) return now_;

  Link& link = link_it->second;
  LedgerEntry entry;
  entry.from = from;
  entry.to = to;
  entry.type = std::string(type);
  entry.bytes = frame->size();
  entry.sent_at = now_;
  entry.start_at = std::max(now_, link.busy_until);
  entry.transfer_ms = transfer_time_ms(entry.bytes, link.config.bandwidth_bytes_per_s);
  link.busy_until = entry.start_at + entry.transfer_ms;
  entry.delivered_at = link.busy_until + link.config.latency_ms;
  link.stats.bytes_sent += entry.bytes;
  ++link.stats.frames;

  SimEvent event;
  event.at = entry.delivered_at;
  event.kind = SimEventKind::kDeliverFrame;
  event.from = from;
  event.to = to;
  event.type = entry.type;
  event.bytes = entry.bytes;
  event.ledger_index = ledger_.size();
  if (on_send) on_send(entry, frame);
  event.frame = std::move(frame);
  ledger_.push_back(std::move(entry));
  const SimTime at = event.at;
  push(std::move(event));
  return at;
}

TimerId SimNetwork::schedule_timer(const std::string& node, SimTime at) {
  SimEvent event;
  event.at = std::max(at, now_);
  event.kind = SimEventKind::kTimerExpiry;
  event.to = node;
  event.timer = next_timer_++;
  const TimerId id = event.timer;
  push(std::move(event));
  return id;
}

void SimNetwork::crash(const std::string& node) {
  auto it = nodes_.find(node);
  if (it == nodes_.end() || !it->second.alive) return;
  it->second.alive = false;
  for (const auto& [key, link] : links_) {
    if (key.first != node) continue;
    SimEvent event;
    event.at = now_ + link.config.latency_ms;
    event.kind = SimEventKind::kLinkDown;
    event.from = node;
    event.to = key.second;
    push(std::move(event));
  }
}

bool SimNetwork::alive(const std::string& node) const {
  const auto it = nodes_.find(node);
  return it != nodes_.end() && it->second.alive;
}

AgentContext& SimNetwork::context(const std::string& node) {
  auto it = nodes_.find(node);
  if (it == nodes_.end()) throw PreconditionError("unknown node '" + node + "'");
  return *it->second.context;
}

void SimNetwork::push(SimEvent event) {
  event.seq = next_seq_++;
  queue_.push(std::move(event));
}

void SimNetwork::record(const SimEvent& event) {
  nlohmann::json line = {{"at", event.at},
                         {"seq", event.seq},
                         {"kind", std::string(to_string(event.kind))},
                         {"from", event.from},
                         {"to", event.to}};
  if (event.kind == SimEventKind::kDeliverFrame) {
    line["type"] = event.type;
    line["bytes"] = event.bytes;
  }
  if (event.kind == SimEventKind::kTimerExpiry) line["timer"] = event.timer;
  const std::string text = line.dump() + "\n";
  trace_hash_ = fnv1a64(text, trace_hash_);
  if (trace_) *trace_ << text;
}

void SimNetwork::dispatch(const SimEvent& event) {
  auto it = nodes_.find(event.to);
  if (it == nodes_.end()) return;
  Node& node = it->second;

  if (event.kind == SimEventKind::kDeliverFrame) {
    auto& entry = ledger_[event.ledger_index];
    entry.received = true;
    links_.at({event.from, event.to}).stats.bytes_received += entry.bytes;
  }
  if (!node.alive || node.agent == nullptr) return;

  switch (event.kind) {
    case SimEventKind::kAgentWake:
      node.agent->on_start();
      break;
    case SimEventKind::kTimerExpiry:
      node.agent->on_timer(event.timer);
      break;
    case SimEventKind::kLinkDown:
      node.agent->on_peer_lost(event.from);
      break;
    case SimEventKind::kDeliverFrame: {
      const auto& entry = ledger_[event.ledger_index];
      protocol::Message msg;
      try {
        msg = protocol::frame_decode(*event.frame);
      } catch (const DecodeError& e) {
        log::warn("dropping undecodable frame from " + event.from + ": " + e.what());
        return;
      }
      const DeliveryInfo info{entry.sent_at, entry.delivered_at, entry.transfer_ms, entry.bytes};
      node.agent->on_message(event.from, msg, info);
      break;
    }
  }
}

bool SimNetwork::step() {
  if (queue_.empty()) return false;
  SimEvent event = queue_.top();
  queue_.pop();
  now_ = event.at;
  ++processed_;
  record(event);
  dispatch(event);
  return true;
}

std::vector<SimEvent> SimNetwork::advance(SimTime until) {
  if (until < now_) throw PreconditionError("cannot advance the clock backwards");
  std::vector<SimEvent> processed;
  while (!queue_.empty() && queue_.top().at <= until) {
    processed.push_back(queue_.top());
    step();
  }
  now_ = until;
  return processed;
}

void SimNetwork::run_until_idle(SimTime limit) {
  while (!queue_.empty() && queue_.top().at <= limit) step();
}

LinkStats SimNetwork::link_stats(const std::string& from, const std::string& to) const {
  const auto it = links_.find({from, to});
  return it == links_.end() ? LinkStats{} : it->second.stats;
}

}  // namespace dynfed::net
