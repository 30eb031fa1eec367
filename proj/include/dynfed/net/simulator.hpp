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
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "dynfed/net/transport.hpp"

namespace dynfed::net {

enum class SimEventKind { kDeliverFrame, kTimerExpiry, kAgentWake, kLinkDown };

std::string_view to_string(SimEventKind kind);

struct SimEvent {
  SimTime at = 0;
  std::uint64_t seq = 0;  // insertion order; breaks ties at equal `at`
  SimEventKind kind = SimEventKind::kAgentWake;
  std::string from;
  std::string to;
  std::string type;  // message type for deliveries
  std::size_t bytes = 0;
  TimerId timer = 0;
  std::size_t ledger_index = 0;
  Frame frame;
};

// One transfer on a directed link.
struct LedgerEntry {
  std::string from;
  std::string to;
  std::string type;
  std::size_t bytes = 0;
  SimTime sent_at = 0;
  SimTime start_at = 0;  // when the link became free for this frame
  SimTime delivered_at = 0;
  std::int64_t transfer_ms = 0;
  bool received = false;
};

struct LinkStats {
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t frames = 0;
};

/// Deterministic discrete-event network.
///
/// Time is integer milliseconds. Each directed link transmits frames FIFO:
/// a frame starts when the previous one on that link finishes, occupies the
/// link for ceil(bytes / bandwidth) ms and is delivered `latency` ms later.
/// Events run in (time, insertion sequence) order on a single thread, and
/// every processed event is folded into a trace hash (optionally also written
/// as JSON lines).
class SimNetwork {
 public:
  explicit SimNetwork(std::optional<std::filesystem::path> trace_path = std::nullopt);
  ~SimNetwork();
  SimNetwork(const SimNetwork&) = delete;
  SimNetwork& operator=(const SimNetwork&) = delete;

  // Registers an agent; it is woken (on_start) at the current time.
  void add_node(const std::string& id, Agent& agent);
  // Two-step form for agents that need their context at construction: the
  // node exists (and is woken) immediately, events reach it once attached.
  AgentContext& add_node(const std::string& id);
  void attach(const std::string& id, Agent& agent);
  void connect(const std::string& a, const std::string& b, const LinkConfig& a_to_b, const LinkConfig& b_to_a);

  // Queues `frame` on the from->to link and returns its delivery time.
  // Throws TransportError when the destination or link is unknown.
  SimTime send(const std::string& from, const std::string& to, Frame frame, std::string_view type);
  TimerId schedule_timer(const std::string& node, SimTime at);
  // Stops a node: its timers and inbound frames are discarded and every
  // connected peer receives a link-down event.
  void crash(const std::string& node);
  bool alive(const std::string& node) const;

  AgentContext& context(const std::string& node);

  SimTime now() const { return now_; }
  bool idle() const { return queue_.empty(); }

  // Processes every event with at <= until, then sets the clock to `until`.
  std::vector<SimEvent> advance(SimTime until);
  // Processes the next event; false when the queue is empty.
  bool step();
  // Runs until the queue drains or the clock would pass `limit`.
  void run_until_idle(SimTime limit = INT64_MAX);

  const std::vector<LedgerEntry>& ledger() const { return ledger_; }
  LinkStats link_stats(const std::string& from, const std::string& to) const;
  std::uint64_t trace_hash() const { return trace_hash_; }
  std::uint64_t events_processed() const { return processed_; }

  // Observes every frame as it is queued; used for wire audits.
  std::function<void(const LedgerEntry&, const Frame&)> on_send;

 private:
  class NodeContext;
  struct Node {
    Agent* agent = nullptr;
    std::unique_ptr<NodeContext> context;
    bool alive = true;
  };
  struct Link {
    LinkConfig config;
    SimTime busy_until = 0;
    LinkStats stats;
  };
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  void push(SimEvent event);
  void dispatch(const SimEvent& event);
  void record(const SimEvent& event);

  std::map<std::string, Node> nodes_;
  std::map<std::pair<std::string, std::string>, Link> links_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::vector<LedgerEntry> ledger_;
  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  TimerId next_timer_ = 1;
  std::uint64_t processed_ = 0;
  std::uint64_t trace_hash_;
  std::optional<std::ofstream> trace_;
};

}  // namespace dynfed::net
