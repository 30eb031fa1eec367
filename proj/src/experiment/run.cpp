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

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "dynfed/errors.hpp"
#include "dynfed/experiment/experiment.hpp"
#include "dynfed/log.hpp"
#include "dynfed/net/tcp.hpp"

namespace dynfed::experiment {

namespace {

std::int64_t reported_training_time(const server::ExperimentReport& report) {
  std::int64_t total = 0;
  for (const auto& m : report.metrics) {
    for (const auto& [id, rec] : m.clients) {
      if (rec.trained) total += rec.training_time_ms;
    }
  }
  return total;
}

}  // namespace

RunResult run_simulation(const ExperimentConfig& config, protocol::JobMode mode, const PreparedData& data,
                         const SimOptions& options) {
  net::SimNetwork net(options.trace_path);
  if (options.tap) net.on_send = options.tap;

  auto job = server::create_job(job_config(config, mode));
  server::Server server(job, data.validation, server_options(config), net.add_node("server"));
  net.attach("server", server);

  const auto resolver = [&data](const std::string&) { return data.validation; };
  std::vector<std::unique_ptr<client::ClientAgent>> clients;
  for (std::size_t i = 0; i < data.client_ids.size(); ++i) {
    const auto& id = data.client_ids[i];
    client::ClientConfig cc{id, "server", data.trainers[i], data.crash_round[i]};
    clients.push_back(std::make_unique<client::ClientAgent>(cc, data.client_data[i], resolver, net.add_node(id)));
    net.attach(id, *clients.back());
    net.connect(id, "server", config.link, config.link);
  }

  net.run_until_idle(options.time_limit);
  if (!server.finished()) {
    throw Error("simulation stopped after " + std::to_string(server.state().current_round) + " of " +
                std::to_string(config.rounds) + " rounds");
  }

  RunResult result;
  result.mode = mode;
  result.report = server.finalize();
  for (const auto& c : clients) result.client_logs.push_back(c->history());
  result.sim_training_time_ms = reported_training_time(result.report);
  result.trace_hash = net.trace_hash();
  result.events = net.events_processed();
  result.simulated = true;
  return result;
}

client::ClientStatus run_tcp_client(TcpClientOptions options) {
  const auto endpoint = net::parse_endpoint(options.server_endpoint);
  std::optional<net::TcpChannel> channel;
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt < options.connect_attempts && !channel; ++attempt) {
    try {
      channel = net::TcpChannel::connect(endpoint, options.connect_timeout);
    } catch (const TransportError& e) {
      last_error = e.what();
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  }
  if (!channel) {
    throw TransportError("server " + options.server_endpoint + " unreachable after " +
                         std::to_string(options.connect_attempts) + " attempts: " + last_error);
  }
  net::SocketRuntime runtime;
  runtime.add_peer(std::move(*channel), options.client.server_id);
  client::ClientAgent agent(options.client, std::move(options.data), options.resolver, runtime);
  runtime.run(agent);
  runtime.stop();
  return agent.status();
}

ClientLauncher thread_launcher(const ExperimentConfig& /*config*/, const PreparedData& data) {
  return [&data](const std::string& endpoint) {
    auto threads = std::make_shared<std::vector<std::thread>>();
    for (std::size_t i = 0; i < data.client_ids.size(); ++i) {
      threads->emplace_back([&data, endpoint, i] {
        TcpClientOptions o;
        o.client = client::ClientConfig{data.client_ids[i], "server", data.trainers[i], data.crash_round[i]};
        o.server_endpoint = endpoint;
        o.data = data.client_data[i];
        o.resolver = [&data](const std::string&) { return data.validation; };
        try {
          run_tcp_client(std::move(o));
        } catch (const std::exception& e) {
          log::error(data.client_ids[i] + ": " + e.what());
        }
      });
    }
    return std::function<void()>([threads] {
      for (auto& t : *threads) t.join();
    });
  };
}

RunResult run_tcp(const ExperimentConfig& config, protocol::JobMode mode, const PreparedData& data,
                  const ClientLauncher& launcher, const std::string& validation_ref,
                  std::chrono::milliseconds timeout) {
  auto jc = job_config(config, mode);
  jc.validation_ref = validation_ref;
  auto job = server::create_job(jc);

  net::TcpListener listener(net::Endpoint{"127.0.0.1", 0});
  net::SocketRuntime runtime;
  server::Server server(job, data.validation, server_options(config), runtime);
  server.on_finished = [&runtime] { runtime.stop(); };
  runtime.serve(listener);
  auto wait_clients = launcher("127.0.0.1:" + std::to_string(listener.port()));

  std::mutex mutex;
  std::condition_variable cv;
  bool done = false;
  std::thread watchdog([&] {
    std::unique_lock lock(mutex);
    if (!cv.wait_for(lock, timeout, [&] { return done; })) {
      log::error("real-transport run timed out");
      runtime.stop();
    }
  });
  runtime.run(server);
  {
    std::lock_guard lock(mutex);
    done = true;
  }
  cv.notify_all();
  watchdog.join();
  runtime.stop();
  wait_clients();

  if (!server.finished()) {
    throw TransportError("real-transport run stopped after " + std::to_string(server.state().current_round) +
                         " of " + std::to_string(config.rounds) + " rounds");
  }
  RunResult result;
  result.mode = mode;
  result.report = server.finalize();
  result.sim_training_time_ms = reported_training_time(result.report);
  result.simulated = false;
  return result;
}

}  // namespace dynfed::experiment
