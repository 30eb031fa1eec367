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

#include "dynfed/net/tcp.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "dynfed/errors.hpp"
#include "dynfed/log.hpp"

namespace dynfed::net {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw TransportError(what + ": " + std::strerror(errno));
}

sockaddr_in resolve(const Endpoint& endpoint) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(endpoint.port);
  if (inet_pton(AF_INET, endpoint.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  if (getaddrinfo(endpoint.host.c_str(), nullptr, &hints, &result) != 0 || result == nullptr) {
    throw TransportError("cannot resolve host '" + endpoint.host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(result->ai_addr)->sin_addr;
  freeaddrinfo(result);
  return addr;
}

void read_exact(int fd, std::uint8_t* out, std::size_t n, bool& eof) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r == 0) {
      if (got == 0) {
        eof = true;
        return;
      }
      throw TransportError("connection closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      fail("recv");
    }
    got += static_cast<std::size_t>(r);
  }
}

}  // namespace

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw TransportError("endpoint must be host:port, got '" + text + "'");
  }
  Endpoint e;
  e.host = text.substr(0, colon);
  try {
    const int port = std::stoi(text.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    e.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw TransportError("invalid port in '" + text + "'");
  }
  return e;
}

std::string to_string(const Endpoint& endpoint) { return endpoint.host + ":" + std::to_string(endpoint.port); }

TcpChannel::TcpChannel(int fd) : fd_(fd) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpChannel::~TcpChannel() { close(); }

TcpChannel::TcpChannel(TcpChannel&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

TcpChannel& TcpChannel::operator=(TcpChannel&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

TcpChannel TcpChannel::connect(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
  const sockaddr_in addr = resolve(endpoint);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) fail("socket");
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
  if (rc < 0 && errno != EINPROGRESS) {
    const int err = errno;
    ::close(fd);
    errno = err;
    fail("connect to " + to_string(endpoint));
  }
  if (rc < 0) {
    pollfd p{fd, POLLOUT, 0};
    rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    int err = 0;
    socklen_t len = sizeof err;
    if (rc <= 0) {
      ::close(fd);
      throw TransportError("connect to " + to_string(endpoint) + " timed out");
    }
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      ::close(fd);
      errno = err;
      fail("connect to " + to_string(endpoint));
    }
  }
  ::fcntl(fd, F_SETFL, flags);
  return TcpChannel(fd);
}

void TcpChannel::send_frame(std::span<const std::uint8_t> frame) {
  std::lock_guard lock(write_mutex_);
  if (fd_ < 0) throw TransportError("send on a closed channel");
  std::size_t sent = 0;
  while (sent < frame.size()) {
    const ssize_t r = ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      fail("send");
    }
    sent += static_cast<std::size_t>(r);
  }
}

std::optional<std::vector<std::uint8_t>> TcpChannel::recv_frame(std::size_t max_frame_size) {
  if (fd_ < 0) throw TransportError("recv on a closed channel");
  std::vector<std::uint8_t> frame(4);
  bool eof = false;
  read_exact(fd_, frame.data(), 4, eof);
  if (eof) return std::nullopt;
  const std::uint32_t length = (std::uint32_t{frame[0]} << 24) | (std::uint32_t{frame[1]} << 16) |
                               (std::uint32_t{frame[2]} << 8) | std::uint32_t{frame[3]};
  if (length > max_frame_size) {
    throw DecodeError(DecodeErrorKind::kFrameTooLarge, 0, "payload length " + std::to_string(length));
  }
  frame.resize(4 + std::size_t{length});
  if (length > 0) {
    read_exact(fd_, frame.data() + 4, length, eof);
    if (eof) throw TransportError("connection closed mid-frame");
  }
  return frame;
}

void TcpChannel::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void TcpChannel::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

TcpListener::TcpListener(const Endpoint& endpoint) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) fail("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = resolve(endpoint);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) fail("bind " + to_string(endpoint));
  if (::listen(fd_, 64) < 0) fail("listen");
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

std::optional<TcpChannel> TcpListener::accept(std::chrono::milliseconds timeout) {
  if (fd_ < 0) return std::nullopt;
  pollfd p{fd_, POLLIN, 0};
  const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (rc <= 0) return std::nullopt;
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) {
    if (errno == EINTR || errno == EAGAIN) return std::nullopt;
    fail("accept");
  }
  return TcpChannel(fd);
}

void TcpListener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

SocketRuntime::SocketRuntime() : start_(std::chrono::steady_clock::now()) {}

SocketRuntime::~SocketRuntime() {
  stop();
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
}

std::size_t SocketRuntime::attach(TcpChannel channel, const std::string& name) {
  std::lock_guard lock(mutex_);
  const std::size_t index = connections_.size();
  connections_.push_back({std::make_shared<TcpChannel>(std::move(channel)), name});
  if (!name.empty()) by_name_[name] = index;
  if (stopped_) connections_.back().channel->shutdown();
  threads_.emplace_back([this, index] { reader_loop(index); });
  return index;
}

void SocketRuntime::add_peer(TcpChannel channel, const std::string& name) { attach(std::move(channel), name); }

void SocketRuntime::serve(TcpListener& listener) {
  std::lock_guard lock(mutex_);
  threads_.emplace_back([this, &listener] {
    while (true) {
      {
        std::lock_guard inner(mutex_);
        if (stopped_) return;
      }
      std::optional<TcpChannel> channel;
      try {
        channel = listener.accept(std::chrono::milliseconds(50));
      } catch (const TransportError& e) {
        log::warn(e.what());
      }
      if (channel) attach(std::move(*channel), "");
    }
  });
}

void SocketRuntime::reader_loop(std::size_t connection) {
  std::shared_ptr<TcpChannel> channel;
  {
    std::lock_guard lock(mutex_);
    channel = connections_[connection].channel;
  }
  while (true) {
    Inbound item{Inbound::Kind::kLost, connection, {}, {}};
    try {
      auto frame = channel->recv_frame();
      if (!frame) break;
      const SimTime received = now();
      item.kind = Inbound::Kind::kMessage;
      item.message = protocol::frame_decode(*frame);
      item.info = DeliveryInfo{received, received, 0, frame->size()};
    } catch (const DecodeError& e) {
      log::warn(std::string("dropping connection after bad frame: ") + e.what());
      break;
    } catch (const TransportError&) {
      break;
    }
    std::lock_guard lock(mutex_);
    inbox_.push_back(std::move(item));
    wake_.notify_one();
  }
  std::lock_guard lock(mutex_);
  inbox_.push_back(Inbound{Inbound::Kind::kLost, connection, {}, {}});
  wake_.notify_one();
}

void SocketRuntime::run(Agent& agent) {
  agent.on_start();
  while (true) {
    std::unique_lock lock(mutex_);
    std::optional<TimerId> due_timer;
    std::optional<Inbound> item;
    while (!stopped_) {
      const SimTime t = now();
      if (!timers_.empty() && timers_.begin()->first <= t) {
        due_timer = timers_.begin()->second;
        timers_.erase(timers_.begin());
        break;
      }
      if (!inbox_.empty()) {
        item = std::move(inbox_.front());
        inbox_.pop_front();
        break;
      }
      if (timers_.empty()) {
        wake_.wait(lock);
      } else {
        wake_.wait_for(lock, std::chrono::milliseconds(timers_.begin()->first - t));
      }
    }
    if (stopped_) return;

    if (due_timer) {
      lock.unlock();
      agent.on_timer(*due_timer);
      continue;
    }
    auto& conn = connections_[item->connection];
    if (item->kind == Inbound::Kind::kMessage && conn.name.empty()) {
      if (const auto* reg = std::get_if<protocol::RegisterClient>(&item->message.body)) {
        conn.name = reg->client_id;
        by_name_[conn.name] = item->connection;
      }
    }
    const std::string from = conn.name.empty() ? "conn-" + std::to_string(item->connection) : conn.name;
    lock.unlock();
    if (item->kind == Inbound::Kind::kMessage) {
      agent.on_message(from, item->message, item->info);
    } else {
      agent.on_peer_lost(from);
    }
  }
}

void SocketRuntime::stop() {
  std::lock_guard lock(mutex_);
  if (stopped_) return;
  stopped_ = true;
  for (auto& c : connections_) c.channel->shutdown();
  wake_.notify_all();
}

SimTime SocketRuntime::now() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
}

void SocketRuntime::send_frame(const std::string& to, Frame frame, std::string_view type) {
  std::shared_ptr<TcpChannel> channel;
  {
    std::lock_guard lock(mutex_);
    const auto it = by_name_.find(to);
    if (it == by_name_.end()) throw TransportError("no connection to '" + to + "'");
    channel = connections_[it->second].channel;
  }
  try {
    channel->send_frame(*frame);
  } catch (const TransportError& e) {
    log::warn("sending " + std::string(type) + " to " + to + " failed: " + e.what());
  }
}

TimerId SocketRuntime::set_timer(std::int64_t delay_ms) {
  std::lock_guard lock(mutex_);
  const TimerId id = next_timer_++;
  timers_.emplace(now() + std::max<std::int64_t>(delay_ms, 0), id);
  wake_.notify_one();
  return id;
}

void SocketRuntime::terminate() { stop(); }

}  // namespace dynfed::net
