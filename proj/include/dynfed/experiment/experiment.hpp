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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynfed/client/client.hpp"
#include "dynfed/model/dataset.hpp"
#include "dynfed/model/fedavg.hpp"
#include "dynfed/model/model_spec.hpp"
#include "dynfed/net/simulator.hpp"
#include "dynfed/protocol/messages.hpp"
#include "dynfed/server/server.hpp"
#include "dynfed/train/data.hpp"

namespace dynfed::experiment {

enum class RunMode { kDefault, kDynamicFusion, kBoth };

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text, std::string_view field = "mode");

// Synthetic blobs shared by every run of an experiment.
struct DataConfig {
  std::size_t classes = 2;
  std::size_t dim = 2;
  std::size_t pool_size = 2800;
  double separation = 10.0;
  std::size_t validation_size = 600;

  bool operator==(const DataConfig&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  RunMode mode = RunMode::kBoth;
  int rounds = 30;
  int epochs = 90;
  double lr = 0.1;
  std::size_t batch_size = 32;
  model::ModelKind model_kind = model::ModelKind::kLogisticRegression;
  std::vector<std::size_t> hidden_dims;
  std::size_t padding = 0;
  DataConfig data;
  std::size_t client_count = 3;
  std::vector<std::size_t> client_sizes{600, 900, 1300};
  std::vector<std::vector<double>> class_skew;  // empty: uniform
  train::FaultSpec faults;
  net::LinkConfig link;
  double slack = 1.2;
  protocol::DeadlinePolicy deadline = protocol::DeadlinePolicy::kGlobal;
  protocol::ParticipationPolicy participation = protocol::ParticipationPolicy::kGlobalMax;
  protocol::DispatchPolicy dispatch = protocol::DispatchPolicy::kAll;
  model::AggregationMode aggregation = model::AggregationMode::kUnweighted;
  std::int64_t epoch_cost_ms = 50;
  // Defaults to twice the simulated time of one full round of local training.
  std::optional<std::int64_t> initial_waiting_time_ms;
  std::int64_t round_timeout_ms = 3'600'000;
  std::string output_dir = "out";

  model::ModelSpec model_spec() const;
  std::int64_t resolved_initial_waiting_ms() const;
  // "client-1" .. "client-N".
  std::vector<std::string> client_ids() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Structural and semantic validation of a parsed document. Every problem is
/// collected and thrown together as one ConfigError; unknown keys are errors.
ExperimentConfig parse_config(const nlohmann::json& doc);
// Reads and validates a config file (JSON).
ExperimentConfig load_config(const std::filesystem::path& path);

struct PreparedData {
  std::vector<std::string> client_ids;
  std::vector<model::Dataset> client_data;
  std::vector<train::TrainerHandle> trainers;
  std::vector<std::optional<int>> crash_round;
  model::Dataset validation;
};

/// Generates the pool and validation set, partitions the pool and applies
/// faults. Deterministic in config.seed; both modes of a paired run share it.
PreparedData prepare_data(const ExperimentConfig& config);

server::JobConfig job_config(const ExperimentConfig& config, protocol::JobMode mode);
server::ServerOptions server_options(const ExperimentConfig& config);

struct RunResult {
  protocol::JobMode mode = protocol::JobMode::kDynamicFusion;
  server::ExperimentReport report;
  std::vector<std::vector<client::ClientRoundLog>> client_logs;
  std::int64_t sim_training_time_ms = 0;  // sum of reported training times
  std::uint64_t trace_hash = 0;
  std::uint64_t events = 0;
  bool simulated = true;
};

struct SimOptions {
  std::optional<std::filesystem::path> trace_path;
  std::function<void(const net::LedgerEntry&, const net::Frame&)> tap;
  // Safety stop for the virtual clock.
  net::SimTime time_limit = INT64_MAX;
};

/// One seeded federation on the simulated network: a server and one client
/// agent per partition. Throws Error if the job does not finish.
RunResult run_simulation(const ExperimentConfig& config, protocol::JobMode mode, const PreparedData& data,
                         const SimOptions& options = {});

// Starts the clients of a real-transport run against `endpoint` and returns
// a function that waits for all of them to exit.
using ClientLauncher = std::function<std::function<void()>(const std::string& endpoint)>;

// Runs every client agent on a thread of this process.
ClientLauncher thread_launcher(const ExperimentConfig& config, const PreparedData& data);

/// The same federation over loopback TCP. The server runs on the calling
/// thread; training times are wall-clock. Throws TransportError if the job
/// does not finish within `timeout`.
RunResult run_tcp(const ExperimentConfig& config, protocol::JobMode mode, const PreparedData& data,
                  const ClientLauncher& launcher, const std::string& validation_ref = "memory:validation",
                  std::chrono::milliseconds timeout = std::chrono::minutes(10));

struct TcpClientOptions {
  client::ClientConfig client;
  std::string server_endpoint;
  model::Dataset data;
  client::ClientAgent::ValidationResolver resolver;
  int connect_attempts = 50;
  std::chrono::milliseconds connect_timeout{200};
};

/// Connects (with bounded retries) and drives one client agent until the job
/// completes or the connection is lost. Throws TransportError when the
/// server never becomes reachable.
client::ClientStatus run_tcp_client(TcpClientOptions options);

// Client partitions and the validation set as DFDS fixtures:
// client-<k>.dfds and validation.dfds.
void write_data_files(const std::filesystem::path& dir, const PreparedData& data);

// metrics.csv: one row per round.
inline constexpr const char* kMetricsHeader =
    "round,mode,participants,skipped,late,uploads,upload_bytes,sim_upload_time_ms,waiting_time_ms,global_acc";
std::string metrics_csv(const server::ExperimentReport& report);
nlohmann::json report_json(const ExperimentConfig& config, const RunResult& result);
// Writes metrics.csv, report.json and final_model.dfpv into `dir`.
void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& config, const RunResult& result);

struct ComparisonSummary {
  std::string baseline_mode;
  std::string candidate_mode;
  std::uint64_t baseline_uploads = 0;
  std::uint64_t candidate_uploads = 0;
  std::int64_t baseline_upload_time_ms = 0;
  std::int64_t candidate_upload_time_ms = 0;
  std::int64_t baseline_training_time_ms = 0;
  std::int64_t candidate_training_time_ms = 0;
  double baseline_final_acc = 0.0;
  double candidate_final_acc = 0.0;
  double upload_count_ratio = 1.0;
  double upload_time_ratio = 1.0;
  double final_acc_delta = 0.0;
  double mean_round_time_delta_ms = 0.0;
};

/// Compares two report.json documents. When the modes differ D_FL is the
/// baseline; otherwise `a` is. Ratios are candidate / baseline (1.0 when
/// both are zero). Throws ComparisonError when the echoed configs differ in
/// anything but mode and output directory.
ComparisonSummary compare(const nlohmann::json& a, const nlohmann::json& b);
nlohmann::json to_json(const ComparisonSummary& summary);
std::string comparison_table(const ComparisonSummary& summary);

enum class Transport { kSim, kTcp };

struct RunOptions {
  Transport transport = Transport::kSim;
  bool trace = false;
  // Real transport only. Receives the server endpoint and the directory the
  // data fixtures were written to; when empty, clients run on threads.
  std::function<std::function<void()>(const std::string& endpoint, const std::filesystem::path& data_dir)>
      launch_clients;
};

struct ExperimentOutcome {
  std::vector<RunResult> runs;
  std::optional<ComparisonSummary> comparison;
};

/// Runs the configured mode(s) and writes each run to output_dir/<mode>;
/// with mode both also writes output_dir/comparison.json.
ExperimentOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace dynfed::experiment
