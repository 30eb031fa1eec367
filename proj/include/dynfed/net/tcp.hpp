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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dynfed/net/transport.hpp"
#include "dynfed/protocol/codec.hpp"

namespace dynfed::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

// "host:port"; throws TransportError when malformed.
Endpoint parse_endpoint(const std::string& text);
std::string to_string(const Endpoint& endpoint);

/// Blocking, length-prefixed frame channel over a TCP stream. One reader and
/// one writer may use a channel concurrently; whole frames are written under
/// a lock so they never interleave.
class TcpChannel {
 public:
  TcpChannel() = default;
  explicit TcpChannel(int fd);
  ~TcpChannel();
  TcpChannel(TcpChannel&& other) noexcept;
  TcpChannel& operator=(TcpChannel&& other) noexcept;
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  // Throws TransportError if nothing accepts within `timeout`.
  static TcpChannel connect(const Endpoint& endpoint, std::chrono::milliseconds timeout);

  bool is_open() const { return fd_ >= 0; }
  void send_frame(std::span<const std::uint8_t> frame);
  // Next complete frame (length prefix included); nullopt on orderly EOF.
  // Throws TransportError on socket errors and DecodeError on oversize frames.
  std::optional<std::vector<std::uint8_t>> recv_frame(std::size_t max_frame_size = protocol::kDefaultMaxFrameSize);
  // Unblocks a concurrent reader.
  void shutdown();
  void close();

 private:
  int fd_ = -1;
  std::mutex write_mutex_;
};

class TcpListener {
 public:
  // Port 0 picks a free port; see port().
  explicit TcpListener(const Endpoint& endpoint);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  // nullopt on timeout.
  std::optional<TcpChannel> accept(std::chrono::milliseconds timeout);
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Event loop that drives one Agent over real sockets.
///
/// Reader threads decode frames and push them onto a single queue; the
/// thread calling run() is the only one that invokes the agent, so agent
/// state needs no locking. Peers are named by the client id announced in
/// their first RegisterClient message (or by the name given to add_peer).
class SocketRuntime final : public AgentContext {
 public:
  SocketRuntime();
  ~SocketRuntime() override;

  // Attaches an established channel. An empty name means "learn it from the
  // first RegisterClient".
  void add_peer(TcpChannel channel, const std::string& name = "");
  // Accepts connections on `listener` in the background until stop().
  void serve(TcpListener& listener);

  // Dispatches events to `agent` until stop() or terminate().
  void run(Agent& agent);
  void stop();

  SimTime now() const override;
  void send_frame(const std::string& to, Frame frame, std::string_view type) override;
  TimerId set_timer(std::int64_t delay_ms) override;
  void terminate() override;
  bool simulated() const override { return false; }

 private:
  struct Connection {
    std::shared_ptr<TcpChannel> channel;
    std::string name;
  };
  struct Inbound {
    enum class Kind { kMessage, kLost } kind;
    std::size_t connection;
    protocol::Message message;
    DeliveryInfo info;
  };

  void reader_loop(std::size_t connection);
  std::size_t attach(TcpChannel channel, const std::string& name);

  std::chrono::steady_clock::time_point start_;
  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::deque<Inbound> inbox_;
  std::vector<Connection> connections_;
  std::map<std::string, std::size_t> by_name_;
  std::vector<std::thread> threads_;
  std::multimap<SimTime, TimerId> timers_;
  TimerId next_timer_ = 1;
  bool stopped_ = false;
};

}  // namespace dynfed::net
