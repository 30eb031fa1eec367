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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dynfed/errors.hpp"
#include "dynfed/experiment/experiment.hpp"
#include "dynfed/file_io.hpp"

using namespace dynfed;
using namespace dynfed::experiment;
using nlohmann::json;
using protocol::JobMode;

namespace {

json default_doc() {
  std::ifstream in(std::string(DYNFED_SOURCE_DIR) + "/configs/default.json");
  return json::parse(in);
}

std::vector<std::string> problems_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& needle) {
  for (const auto& p : problems) {
    if (p.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dynfed_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("the shipped config parses to the built-in defaults") {
    const auto c = parse_config(default_doc());
    const ExperimentConfig d;
    CHECK(to_json(c) == to_json(d));
    CHECK(c.rounds == 30);
    CHECK(c.epochs == 90);
    CHECK(c.client_count == 3);
    CHECK(c.client_sizes == std::vector<std::size_t>{600, 900, 1300});
    CHECK(c.link.bandwidth_bytes_per_s == 10'485'760);
    CHECK(c.resolved_initial_waiting_ms() == 9000);
  }

  TEST_CASE("an empty document takes every default") {
    CHECK(to_json(parse_config(json::object())) == to_json(ExperimentConfig{}));
  }

  TEST_CASE("negative rounds names the field") {
    auto doc = default_doc();
    doc["rounds"] = -1;
    const auto p = problems_of(doc);
    REQUIRE(p.size() == 1);
    CHECK(p[0].rfind("rounds", 0) == 0);
  }

  TEST_CASE("every problem is reported at once") {
    auto doc = default_doc();
    doc["rounds"] = 0;
    doc["lr"] = "fast";
    doc["colour"] = "blue";
    doc["link"]["bandwidth_bytes_per_s"] = 0;
    doc["mode"] = "sometimes";
    doc["partition"]["client_sizes"] = {600, 900};
    const auto p = problems_of(doc);
    CHECK(p.size() >= 6);
    CHECK(mentions(p, "rounds"));
    CHECK(mentions(p, "lr"));
    CHECK(mentions(p, "colour: unknown key"));
    CHECK(mentions(p, "link.bandwidth_bytes_per_s"));
    CHECK(mentions(p, "mode"));
    CHECK(mentions(p, "partition.client_sizes"));
  }

  TEST_CASE("unknown nested keys and bad faults") {
    auto doc = default_doc();
    doc["model"]["depth"] = 3;
    doc["faults"] = {{"crash", {{"client", "client-7"}, {"at_round", 99}}}};
    const auto p = problems_of(doc);
    CHECK(mentions(p, "model.depth: unknown key"));
    CHECK(mentions(p, "faults.crash.client"));
  }

  TEST_CASE("partition sizes beyond the pool are infeasible") {
    auto doc = default_doc();
    doc["partition"]["client_sizes"] = {600, 900, 2000};
    const auto p = problems_of(doc);
    REQUIRE_FALSE(p.empty());
    CHECK(mentions(p, "partition:"));
  }

  TEST_CASE("class skew must match the client count and sum to one") {
    auto doc = default_doc();
    doc["partition"]["class_skew"] = {{0.5, 0.5}, {0.7, 0.7}};
    const auto p = problems_of(doc);
    CHECK(mentions(p, "class_skew"));
  }

  TEST_CASE("the echo round-trips through the parser") {
    auto doc = default_doc();
    doc["faults"] = {{"slow_client", {{"client", "client-3"}, {"extra_delay_ms", 10}, {"delay_multiplier", 2.5}}},
                     {"label_flip", {{"client", "client-2"}, {"fraction", 0.5}, {"from_class", 0}, {"to_class", 1}}}};
    doc["initial_waiting_time_ms"] = 777;
    doc["model"] = {{"kind", "mlp"}, {"hidden_dims", {4}}, {"padding", 3}};
    const auto c = parse_config(doc);
    const auto echo = to_json(c);
    CHECK(to_json(parse_config(echo)) == echo);
    CHECK(echo["initial_waiting_time_ms"] == 777);
  }

  TEST_CASE("load_config reports unreadable files and bad JSON") {
    const auto dir = scratch("cfg");
    std::filesystem::create_directories(dir);
    CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
    std::ofstream(dir / "bad.json") << "{ nope";
    CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
    std::filesystem::remove_all(dir);
  }
}

TEST_SUITE("outputs") {
  TEST_CASE("metrics.csv schema") {
    ExperimentConfig c;
    c.rounds = 7;
    c.epochs = 10;
    const auto data = prepare_data(c);
    for (auto mode : {JobMode::kDefault, JobMode::kDynamicFusion}) {
      const auto r = run_simulation(c, mode, data);
      const auto lines = split_lines(metrics_csv(r.report));
      REQUIRE(lines.size() == 8);
      CHECK(lines[0] == kMetricsHeader);
      for (std::size_t i = 1; i < lines.size(); ++i) {
        std::vector<std::string> cells;
        std::istringstream row(lines[i]);
        for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
        REQUIRE(cells.size() == 10);
        CHECK(std::stoi(cells[0]) == static_cast<int>(i));
        CHECK(cells[1] == protocol::to_string(mode));
        const auto participants = std::stoul(cells[2]);
        const auto skipped = std::stoul(cells[3]);
        const auto late = std::stoul(cells[4]);
        const auto uploads = std::stoul(cells[5]);
        CHECK(participants + skipped + late == 3);
        CHECK(uploads >= participants);
        const double acc = std::stod(cells[9]);
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
      }
    }
  }

  TEST_CASE("report echoes the resolved config") {
    ExperimentConfig c;
    c.rounds = 2;
    c.epochs = 3;
    const auto r = run_simulation(c, JobMode::kDynamicFusion, prepare_data(c));
    const auto doc = report_json(c, r);
    CHECK(doc["config"] == to_json(c));
    CHECK(doc["config"]["initial_waiting_time_ms"] == 300);
    CHECK(doc["rounds"].size() == 2);
    CHECK(doc["mode"] == "DF_FL");
    CHECK(doc["job_id"] == "job-1");
  }

  TEST_CASE("compare: identical reports") {
    ExperimentConfig c;
    c.rounds = 3;
    c.epochs = 5;
    const auto r = run_simulation(c, JobMode::kDynamicFusion, prepare_data(c));
    const auto doc = report_json(c, r);
    const auto s = compare(doc, doc);
    CHECK(s.upload_count_ratio == 1.0);
    CHECK(s.upload_time_ratio == 1.0);
    CHECK(s.final_acc_delta == 0.0);
    CHECK(s.mean_round_time_delta_ms == 0.0);
    CHECK(comparison_table(s).find("uploads") != std::string::npos);
  }

  TEST_CASE("compare: D_FL is the baseline whichever order") {
    ExperimentConfig c;
    c.rounds = 3;
    c.epochs = 5;
    c.initial_waiting_time_ms = 1;  // DF_FL: nobody makes the deadline
    const auto data = prepare_data(c);
    const auto d = report_json(c, run_simulation(c, JobMode::kDefault, data));
    const auto f = report_json(c, run_simulation(c, JobMode::kDynamicFusion, data));
    const auto s = compare(f, d);
    CHECK(s.baseline_mode == "D_FL");
    CHECK(s.baseline_uploads == 9);
    CHECK(s.candidate_uploads == 0);
    CHECK(s.upload_count_ratio == 0.0);
    CHECK(s.upload_time_ratio == 0.0);
  }

  TEST_CASE("compare: zero over zero is one") {
    json a = {{"config", to_json(ExperimentConfig{})},
              {"mode", "DF_FL"},
              {"totals",
               {{"uploads", 0},
                {"sim_upload_time_ms", 0},
                {"sim_training_time_ms", 0},
                {"final_acc", 0.5},
                {"mean_round_time_ms", 10.0}}}};
    const auto s = compare(a, a);
    CHECK(s.upload_count_ratio == 1.0);
    CHECK(s.upload_time_ratio == 1.0);
  }

  TEST_CASE("compare: mismatched configs") {
    ExperimentConfig c;
    c.rounds = 2;
    c.epochs = 2;
    const auto doc = report_json(c, run_simulation(c, JobMode::kDynamicFusion, prepare_data(c)));
    auto other = doc;
    other["config"]["seed"] = 2;
    CHECK_THROWS_AS(compare(doc, other), ComparisonError);
    auto relocated = doc;
    relocated["config"]["output_dir"] = "elsewhere";
    CHECK_NOTHROW(compare(doc, relocated));
  }

  TEST_CASE("run_experiment writes both runs and the comparison") {
    ExperimentConfig c;
    c.rounds = 3;
    c.epochs = 5;
    const auto dir = scratch("run");
    c.output_dir = dir.string();
    RunOptions o;
    o.trace = true;
    const auto outcome = run_experiment(c, o);
    CHECK(outcome.runs.size() == 2);
    REQUIRE(outcome.comparison.has_value());
    for (const char* mode : {"D_FL", "DF_FL"}) {
      CHECK(std::filesystem::exists(dir / mode / "metrics.csv"));
      CHECK(std::filesystem::exists(dir / mode / "report.json"));
      CHECK(std::filesystem::exists(dir / mode / "final_model.dfpv"));
      CHECK(std::filesystem::exists(dir / mode / "trace.jsonl"));
    }
    CHECK(std::filesystem::exists(dir / "comparison.json"));
    std::filesystem::remove_all(dir);
  }
}

TEST_SUITE("scenarios") {
  TEST_CASE("default config: D_FL uploads 90 times") {
    ExperimentConfig c;
    const auto data = prepare_data(c);
    const auto d = run_simulation(c, JobMode::kDefault, data);
    CHECK(d.report.totals.uploads == 90);
    const auto f = run_simulation(c, JobMode::kDynamicFusion, data);
    CHECK(f.report.totals.uploads <= 90);
    CHECK(f.report.totals.sim_upload_time_ms <= d.report.totals.sim_upload_time_ms);
  }

  TEST_CASE("same config twice gives the same report.json") {
    ExperimentConfig c;
    c.rounds = 5;
    c.epochs = 10;
    const auto a = report_json(c, run_simulation(c, JobMode::kDynamicFusion, prepare_data(c))).dump();
    const auto b = report_json(c, run_simulation(c, JobMode::kDynamicFusion, prepare_data(c))).dump();
    CHECK(a == b);
  }

  TEST_CASE("slow client: late in DF_FL, and D_FL waits for it") {
    ExperimentConfig c;
    c.rounds = 10;
    c.epochs = 20;
    c.faults.slow_client = train::SlowClient{"client-3", 0, 2.5};
    const auto data = prepare_data(c);
    const auto f = run_simulation(c, JobMode::kDynamicFusion, data);
    const auto d = run_simulation(c, JobMode::kDefault, data);
    int late = 0;
    for (const auto& m : f.report.metrics) late += m.clients.at("client-3").late ? 1 : 0;
    CHECK(late > 0);
    CHECK(d.report.totals.mean_round_time_ms > f.report.totals.mean_round_time_ms);
  }

  TEST_CASE("DF_FL never uploads more than D_FL") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      ExperimentConfig c;
      c.seed = seed;
      c.rounds = 8;
      c.epochs = 15;
      c.data.separation = 3.0;
      c.data.pool_size = 4200;
      c.class_skew = {{0.8, 0.2}, {0.3, 0.7}, {0.5, 0.5}};
      const auto data = prepare_data(c);
      const auto d = run_simulation(c, JobMode::kDefault, data);
      const auto f = run_simulation(c, JobMode::kDynamicFusion, data);
      CHECK(f.report.totals.uploads <= d.report.totals.uploads);
      CHECK(f.report.totals.sim_upload_time_ms <= d.report.totals.sim_upload_time_ms);
    }
  }
}
