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

#include <doctest.h>

#include <map>

#include "dynfed/errors.hpp"
#include "dynfed/net/simulator.hpp"
#include "support/test_support.hpp"

using namespace dynfed;
using namespace dynfed::net;

namespace {

// Records what it sees; optionally echoes every message back.
struct Probe final : Agent {
  struct Seen {
    std::string what;
    SimTime at;
    DeliveryInfo info;
  };
  AgentContext* ctx = nullptr;
  bool echo = false;
  std::vector<Seen> seen;

  void on_message(const std::string& from, const protocol::Message& msg, const DeliveryInfo& info) override {
    seen.push_back({"msg:" + std::string(protocol::type_name(msg)), ctx->now(), info});
    if (echo) ctx->send(from, msg);
  }
  void on_timer(TimerId id) override { seen.push_back({"timer:" + std::to_string(id), ctx->now(), {}}); }
  void on_peer_lost(const std::string& peer) override { seen.push_back({"lost:" + peer, ctx->now(), {}}); }
};

Frame sized_frame(std::size_t bytes) { return std::make_shared<const std::vector<std::uint8_t>>(bytes, 0); }

struct Pair {
  SimNetwork net;
  Probe a, b;
  explicit Pair(LinkConfig link = {}) {
    a.ctx = &net.add_node("a");
    net.attach("a", a);
    b.ctx = &net.add_node("b");
    net.attach("b", b);
    net.connect("a", "b", link, link);
  }
};

}  // namespace

TEST_SUITE("simulator") {
  TEST_CASE("10 MiB at 10 MB/s takes one second") {
    Pair p;
    CHECK(p.net.send("a", "b", sized_frame(10'485'760), "blob") == 1000);
    CHECK(p.net.ledger().back().transfer_ms == 1000);
  }

  TEST_CASE("a tiny frame still takes one millisecond") {
    Pair p;
    CHECK(p.net.send("a", "b", sized_frame(100), "blob") == 1);
    CHECK(transfer_time_ms(0, 10) == 0);
  }

  TEST_CASE("frames on one link are serialized") {
    Pair p;
    const std::size_t mb = 1'048'576;
    CHECK(p.net.send("a", "b", sized_frame(mb), "x") == 100);
    CHECK(p.net.send("a", "b", sized_frame(mb), "x") == 200);
    // the reverse direction is independent
    CHECK(p.net.send("b", "a", sized_frame(mb), "x") == 100);
  }

  TEST_CASE("latency is added after the transfer") {
    Pair p(LinkConfig{1000, 25});
    CHECK(p.net.send("a", "b", sized_frame(500), "x") == 525);
  }

  TEST_CASE("advance with nothing pending moves the clock") {
    SimNetwork net;
    CHECK(net.advance(5000).empty());
    CHECK(net.now() == 5000);
  }

  TEST_CASE("timer and delivery at the same instant follow insertion order") {
    for (int order = 0; order < 2; ++order) {
      Pair p(LinkConfig{1'000'000'000, 4999});  // small frame: 1 ms on the wire + 4999 ms latency
      p.net.run_until_idle();
      const auto t0 = p.net.now();
      if (order == 0) {
        p.net.schedule_timer("b", t0 + 5000);
        p.net.send("a", "b", make_frame({"", protocol::JobComplete{1}}), "job_complete");
      } else {
        p.net.send("a", "b", make_frame({"", protocol::JobComplete{1}}), "job_complete");
        p.net.schedule_timer("b", t0 + 5000);
      }
      p.b.seen.clear();
      const auto events = p.net.advance(t0 + 100'000);
      REQUIRE(p.b.seen.size() == 2);
      const bool timer_first = p.b.seen[0].what.rfind("timer", 0) == 0;
      CHECK(timer_first == (order == 0));
    }
  }

  TEST_CASE("unknown destination is a transport error") {
    Pair p;
    CHECK_THROWS_AS(p.net.send("a", "nobody", sized_frame(1), "x"), TransportError);
  }

  TEST_CASE("bytes are conserved per link and upload time adds up") {
    Pair p;
    p.b.echo = true;
    testing::Gen g(3);
    for (int i = 0; i < 200; ++i) {
      const auto m = testing::random_message(g, static_cast<std::size_t>(i));
      p.net.send("a", "b", make_frame(m), protocol::type_name(m));
    }
    p.net.run_until_idle();
    for (auto [from, to] : {std::pair{"a", "b"}, std::pair{"b", "a"}}) {
      const auto s = p.net.link_stats(from, to);
      CHECK(s.frames == 200);
      CHECK(s.bytes_sent == s.bytes_received);
    }
    std::int64_t sum = 0;
    std::int64_t expected = 0;
    for (const auto& e : p.net.ledger()) {
      if (e.from != "a") continue;
      sum += e.transfer_ms;
      expected += transfer_time_ms(e.bytes, LinkConfig{}.bandwidth_bytes_per_s);
    }
    CHECK(sum == expected);
  }

  TEST_CASE("crash: peers see the link go down and the node gets nothing more") {
    Pair p;
    p.net.run_until_idle();
    p.net.send("a", "b", make_frame({"", protocol::JobComplete{1}}), "job_complete");
    p.net.crash("b");
    p.net.run_until_idle();
    CHECK_FALSE(p.net.alive("b"));
    CHECK(p.b.seen.empty());
    REQUIRE(p.a.seen.size() == 1);
    CHECK(p.a.seen[0].what == "lost:b");
    const auto s = p.net.link_stats("a", "b");
    CHECK(s.bytes_sent == s.bytes_received);
  }

  TEST_CASE("identical inputs give identical trace hashes") {
    auto run = [] {
      Pair p;
      p.b.echo = true;
      testing::Gen g(5);
      for (int i = 0; i < 50; ++i) {
        const auto m = testing::random_message(g, static_cast<std::size_t>(i));
        p.net.send("a", "b", make_frame(m), protocol::type_name(m));
        p.net.schedule_timer("a", g.integer(0, 100));
      }
      p.net.run_until_idle();
      return std::pair{p.net.trace_hash(), p.net.events_processed()};
    };
    CHECK(run() == run());
  }

  TEST_CASE("the clock never goes backwards") {
    Pair p;
    p.b.echo = true;
    testing::Gen g(6);
    for (int i = 0; i < 100; ++i) {
      p.net.send("a", "b", make_frame({"", protocol::UploadAccept{i}}), "upload_accept");
      p.net.schedule_timer(g.coin() ? "a" : "b", g.integer(0, 1000));
    }
    SimTime last = 0;
    while (p.net.step()) {
      CHECK(p.net.now() >= last);
      last = p.net.now();
    }
  }
}
