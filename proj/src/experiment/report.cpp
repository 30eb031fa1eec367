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

#include <cstdio>
#include <sstream>

#include "dynfed/errors.hpp"
#include "dynfed/experiment/experiment.hpp"
#include "dynfed/file_io.hpp"
#include "dynfed/log.hpp"
#include "dynfed/train/data.hpp"

namespace dynfed::experiment {

using nlohmann::json;

namespace {

// Shortest text that reads back to the same double.
std::string number_text(double x) { return json(x).dump(); }

json id_list(const std::set<std::string>& ids) { return json(std::vector<std::string>(ids.begin(), ids.end())); }

double ratio(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace

std::string metrics_csv(const server::ExperimentReport& report) {
  std::ostringstream out;
  out << kMetricsHeader << "\n";
  for (const auto& m : report.metrics) {
    out << m.round << ',' << protocol::to_string(m.mode) << ',' << m.participants << ',' << m.skipped << ','
        << m.late << ',' << m.uploads << ',' << m.upload_bytes << ',' << m.sim_upload_time_ms << ','
        << m.waiting_time_ms << ',' << number_text(m.global_acc) << "\n";
  }
  return out.str();
}

json report_json(const ExperimentConfig& config, const RunResult& result) {
  const auto& r = result.report;
  json rounds = json::array();
  for (std::size_t i = 0; i < r.metrics.size(); ++i) {
    const auto& m = r.metrics[i];
    json clients = json::object();
    for (const auto& [id, rec] : m.clients) {
      clients[id] = {{"trained", rec.trained},
                     {"training_time_ms", rec.training_time_ms},
                     {"local_acc", rec.local_acc ? json(*rec.local_acc) : json(nullptr)},
                     {"uploaded", rec.uploaded},
                     {"late", rec.late}};
    }
    json row = {{"round", m.round},
                {"aggregated", m.aggregated},
                {"uploads", m.uploads},
                {"upload_bytes", m.upload_bytes},
                {"sim_upload_time_ms", m.sim_upload_time_ms},
                {"download_bytes", m.download_bytes},
                {"waiting_time_ms", m.waiting_time_ms},
                {"started_at_ms", m.started_at},
                {"closed_at_ms", m.closed_at},
                {"global_acc", m.global_acc},
                {"clients", clients}};
    if (i < r.outcomes.size()) {
      row["participants"] = id_list(r.outcomes[i].participants);
      row["excluded_late"] = id_list(r.outcomes[i].excluded_late);
      row["skipped_by_choice"] = id_list(r.outcomes[i].skipped_by_choice);
    }
    rounds.push_back(std::move(row));
  }
  const auto& t = r.totals;
  json doc = {
      {"config", to_json(config)},
      {"mode", std::string(protocol::to_string(result.mode))},
      {"seed", config.seed},
      {"job_id", r.job_id},
      {"transport", result.simulated ? "sim" : "tcp"},
      {"totals",
       {{"rounds", t.rounds},
        {"aggregated_rounds", t.aggregated_rounds},
        {"uploads", t.uploads},
        {"upload_bytes", t.upload_bytes},
        {"sim_upload_time_ms", t.sim_upload_time_ms},
        {"download_bytes", t.download_bytes},
        {"total_time_ms", t.total_time_ms},
        {"mean_round_time_ms", t.mean_round_time_ms},
        {"sim_training_time_ms", result.sim_training_time_ms},
        {"final_acc", t.final_acc}}},
      {"rounds", rounds},
      {"final_model",
       {{"file", "final_model.dfpv"},
        {"bytes", r.final_model_bytes.size()},
        {"fnv1a64", hex64(fnv1a64(r.final_model_bytes))}}},
  };
  if (result.simulated) {
    doc["trace_hash"] = hex64(result.trace_hash);
    doc["events"] = result.events;
  }
  return doc;
}

void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& config, const RunResult& result) {
  write_text(dir / "metrics.csv", metrics_csv(result.report));
  write_text(dir / "report.json", report_json(config, result).dump(2) + "\n");
  write_file(dir / "final_model.dfpv", result.report.final_model_bytes);
}

ComparisonSummary compare(const json& a, const json& b) {
  for (const auto* doc : {&a, &b}) {
    if (!doc->is_object() || !doc->contains("config") || !doc->contains("totals") || !doc->contains("mode")) {
      throw ComparisonError("input is not a run report");
    }
  }
  auto strip = [](json config) {
    config.erase("mode");
    config.erase("output_dir");
    return config;
  };
  if (strip(a["config"]) != strip(b["config"])) {
    std::string detail;
    const auto diff = json::diff(strip(a["config"]), strip(b["config"]));
    for (const auto& op : diff) detail += (detail.empty() ? "" : ", ") + op["path"].get<std::string>();
    throw ComparisonError("reports come from different configs (" + detail + ")");
  }
  const bool swap = a["mode"] != b["mode"] && b["mode"] == "D_FL";
  const json& base = swap ? b : a;
  const json& cand = swap ? a : b;
  const auto& bt = base["totals"];
  const auto& ct = cand["totals"];

  ComparisonSummary s;
  s.baseline_mode = base["mode"].get<std::string>();
  s.candidate_mode = cand["mode"].get<std::string>();
  s.baseline_uploads = bt["uploads"].get<std::uint64_t>();
  s.candidate_uploads = ct["uploads"].get<std::uint64_t>();
  s.baseline_upload_time_ms = bt["sim_upload_time_ms"].get<std::int64_t>();
  s.candidate_upload_time_ms = ct["sim_upload_time_ms"].get<std::int64_t>();
  s.baseline_training_time_ms = bt["sim_training_time_ms"].get<std::int64_t>();
  s.candidate_training_time_ms = ct["sim_training_time_ms"].get<std::int64_t>();
  s.baseline_final_acc = bt["final_acc"].get<double>();
  s.candidate_final_acc = ct["final_acc"].get<double>();
  s.upload_count_ratio =
      ratio(static_cast<double>(s.candidate_uploads), static_cast<double>(s.baseline_uploads));
  s.upload_time_ratio =
      ratio(static_cast<double>(s.candidate_upload_time_ms), static_cast<double>(s.baseline_upload_time_ms));
  s.final_acc_delta = s.candidate_final_acc - s.baseline_final_acc;
  s.mean_round_time_delta_ms = ct["mean_round_time_ms"].get<double>() - bt["mean_round_time_ms"].get<double>();
  return s;
}

json to_json(const ComparisonSummary& s) {
  return json{{"baseline_mode", s.baseline_mode},
              {"candidate_mode", s.candidate_mode},
              {"baseline_uploads", s.baseline_uploads},
              {"candidate_uploads", s.candidate_uploads},
              {"baseline_upload_time_ms", s.baseline_upload_time_ms},
              {"candidate_upload_time_ms", s.candidate_upload_time_ms},
              {"baseline_training_time_ms", s.baseline_training_time_ms},
              {"candidate_training_time_ms", s.candidate_training_time_ms},
              {"baseline_final_acc", s.baseline_final_acc},
              {"candidate_final_acc", s.candidate_final_acc},
              {"upload_count_ratio", s.upload_count_ratio},
              {"upload_time_ratio", s.upload_time_ratio},
              {"final_acc_delta", s.final_acc_delta},
              {"mean_round_time_delta_ms", s.mean_round_time_delta_ms}};
}

std::string comparison_table(const ComparisonSummary& s) {
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-24s %16s %16s %16s\n", "metric", s.baseline_mode.c_str(),
                s.candidate_mode.c_str(), "delta");
  out += buf;
  auto row_int = [&](const char* name, long long base, long long cand) {
    std::snprintf(buf, sizeof buf, "%-24s %16lld %16lld %+16lld\n", name, base, cand, cand - base);
    out += buf;
  };
  row_int("uploads", static_cast<long long>(s.baseline_uploads), static_cast<long long>(s.candidate_uploads));
  row_int("upload time (ms)", s.baseline_upload_time_ms, s.candidate_upload_time_ms);
  row_int("training time (ms)", s.baseline_training_time_ms, s.candidate_training_time_ms);
  std::snprintf(buf, sizeof buf, "%-24s %16.4f %16.4f %+16.4f\n", "final accuracy", s.baseline_final_acc,
                s.candidate_final_acc, s.final_acc_delta);
  out += buf;
  std::snprintf(buf, sizeof buf, "upload count ratio %.4f, upload time ratio %.4f, mean round time delta %+.1f ms\n",
                s.upload_count_ratio, s.upload_time_ratio, s.mean_round_time_delta_ms);
  out += buf;
  return out;
}

void write_data_files(const std::filesystem::path& dir, const PreparedData& data) {
  for (std::size_t i = 0; i < data.client_ids.size(); ++i) {
    train::write_dataset(dir / (data.client_ids[i] + ".dfds"), data.client_data[i]);
  }
  train::write_dataset(dir / "validation.dfds", data.validation);
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto data = prepare_data(config);
  std::vector<protocol::JobMode> modes;
  if (config.mode != RunMode::kDynamicFusion) modes.push_back(protocol::JobMode::kDefault);
  if (config.mode != RunMode::kDefault) modes.push_back(protocol::JobMode::kDynamicFusion);

  const std::filesystem::path root(config.output_dir);
  ExperimentOutcome outcome;
  std::vector<json> reports;
  for (const auto mode : modes) {
    const auto dir = root / std::string(protocol::to_string(mode));
    RunResult result;
    if (options.transport == Transport::kSim) {
      SimOptions sim;
      if (options.trace) sim.trace_path = dir / "trace.jsonl";
      result = run_simulation(config, mode, data, sim);
    } else if (options.launch_clients) {
      const auto data_dir = std::filesystem::absolute(dir / "data");
      write_data_files(data_dir, data);
      const ClientLauncher launcher = [&](const std::string& endpoint) {
        return options.launch_clients(endpoint, data_dir);
      };
      result = run_tcp(config, mode, data, launcher, (data_dir / "validation.dfds").string());
    } else {
      result = run_tcp(config, mode, data, thread_launcher(config, data));
    }
    write_outputs(dir, config, result);
    log::info(std::string(protocol::to_string(mode)) + " finished: " + std::to_string(result.report.totals.uploads) +
              " uploads, final accuracy " + number_text(result.report.totals.final_acc));
    reports.push_back(report_json(config, result));
    outcome.runs.push_back(std::move(result));
  }
  if (reports.size() == 2) {
    outcome.comparison = compare(reports[0], reports[1]);
    write_text(root / "comparison.json", to_json(*outcome.comparison).dump(2) + "\n");
  }
  return outcome;
}

}  // namespace dynfed::experiment
