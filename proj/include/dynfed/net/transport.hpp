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
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dynfed/protocol/messages.hpp"

namespace dynfed::net {

// Integer milliseconds: virtual time in the simulator, monotonic wall time
// since runtime start on real sockets.
using SimTime = std::int64_t;
using TimerId = std::uint64_t;
using Frame = std::shared_ptr<const std::vector<std::uint8_t>>;

Frame make_frame(const protocol::Message& msg);

struct LinkConfig {
  std::int64_t bandwidth_bytes_per_s = 10'485'760;  // 10 MB/s
  std::int64_t latency_ms = 0;

  bool operator==(const LinkConfig&) const = default;
};

// ceil(bytes / bandwidth) expressed in milliseconds.
std::int64_t transfer_time_ms(std::uint64_t bytes, std::int64_t bandwidth_bytes_per_s);

struct DeliveryInfo {
  SimTime sent_at = 0;
  SimTime delivered_at = 0;
  std::int64_t transfer_ms = 0;  // time spent on the wire (excludes queueing and latency)
  std::size_t bytes = 0;         // whole frame including the length prefix
};

/// What an agent (server or client) can do to the outside world. Implemented
/// by the simulator and by the socket runtime, so agents are transport-blind.
class AgentContext {
 public:
  virtual ~AgentContext() = default;

  virtual SimTime now() const = 0;
  virtual void send_frame(const std::string& to, Frame frame, std::string_view type) = 0;
  void send(const std::string& to, const protocol::Message& msg);
  // Fires Agent::on_timer after `delay_ms`.
  virtual TimerId set_timer(std::int64_t delay_ms) = 0;
  // The agent stops; peers observe a lost connection.
  virtual void terminate() = 0;
  virtual bool simulated() const = 0;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual void on_start() {}
  virtual void on_message(const std::string& from, const protocol::Message& msg, const DeliveryInfo& info) = 0;
  virtual void on_timer(TimerId id) = 0;
  virtual void on_peer_lost(const std::string& /*peer*/) {}
};

}  // namespace dynfed::net
