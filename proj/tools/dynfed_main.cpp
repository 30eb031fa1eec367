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

// Command-line front end: run, compare, validate, gen-data, plus the hidden
// client verb used for real-socket runs.

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <memory>

#include "dynfed/errors.hpp"
#include "dynfed/experiment/experiment.hpp"
#include "dynfed/file_io.hpp"
#include "dynfed/log.hpp"
#include "dynfed/train/data.hpp"

extern char** environ;

namespace {

using namespace dynfed;
using nlohmann::json;

constexpr int kExitConfig = 2;

std::filesystem::path self_path() { return std::filesystem::read_symlink("/proc/self/exe"); }

pid_t spawn(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  pid_t pid = 0;
  if (posix_spawn(&pid, argv[0], nullptr, nullptr, argv.data(), environ) != 0) {
    throw Error("cannot start client process " + args[0]);
  }
  return pid;
}

// One `dynfed client` process per client; the returned function reaps them.
std::function<void()> launch_processes(const experiment::ExperimentConfig& config, const std::string& endpoint,
                                       const std::filesystem::path& data_dir, const std::string& log_level) {
  const auto exe = self_path().string();
  const auto ids = config.client_ids();
  const auto data = experiment::prepare_data(config);
  auto pids = std::make_shared<std::vector<pid_t>>();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<std::string> args{exe,
                                  "client",
                                  "--id",
                                  ids[i],
                                  "--server",
                                  endpoint,
                                  "--data",
                                  (data_dir / (ids[i] + ".dfds")).string(),
                                  "--seed",
                                  std::to_string(data.trainers[i].seed),
                                  "--extra-delay-ms",
                                  std::to_string(data.trainers[i].extra_delay_ms),
                                  "--log-level",
                                  log_level};
    if (data.crash_round[i]) {
      args.push_back("--crash-round");
      args.push_back(std::to_string(*data.crash_round[i]));
    }
    pids->push_back(spawn(args));
  }
  return [pids] {
    for (pid_t pid : *pids) {
      int status = 0;
      waitpid(pid, &status, 0);
    }
  };
}

void apply_log_level(const std::string& name) {
  if (name == "debug") log::set_level(log::Level::kDebug);
  else if (name == "info") log::set_level(log::Level::kInfo);
  else if (name == "warn") log::set_level(log::Level::kWarn);
  else log::set_level(log::Level::kError);
}

int report_config_error(const ConfigError& e) {
  std::cerr << "invalid config:\n";
  for (const auto& p : e.problems()) std::cerr << "  " << p << "\n";
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning with dynamic fusion: seeded experiments and protocol tools"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "debug, info, warn or error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

  // run
  auto* run = app.add_subcommand("run", "Run an experiment config");
  std::string run_config;
  std::optional<std::string> run_mode;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> run_out;
  std::string transport = "sim";
  bool trace = false;
  run->add_option("config", run_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", run_mode, "D_FL, DF_FL or both")->check(CLI::IsMember({"D_FL", "DF_FL", "both"}));
  run->add_option("--seed", run_seed, "Override the config seed");
  run->add_option("--out", run_out, "Override the output directory");
  run->add_option("--transport", transport, "sim or tcp")->check(CLI::IsMember({"sim", "tcp"}));
  run->add_flag("--trace", trace, "Write trace.jsonl (sim only)");

  // compare
  auto* cmp = app.add_subcommand("compare", "Compare two report.json files");
  std::string report_a, report_b;
  bool cmp_json = false;
  cmp->add_option("report_a", report_a)->required()->check(CLI::ExistingFile);
  cmp->add_option("report_b", report_b)->required()->check(CLI::ExistingFile);
  cmp->add_flag("--json", cmp_json, "Print the machine-readable summary");

  // validate
  auto* val = app.add_subcommand("validate", "Validate a config and print it with defaults filled in");
  std::string val_config;
  val->add_option("config", val_config)->required();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset fixture (DFDS)");
  std::string gen_spec, gen_out;
  gen->add_option("spec", gen_spec, "JSON with classes, dim, samples, separation, seed")
      ->required()
      ->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Fixture path")->required();

  // client (spawned by run --transport tcp)
  auto* cli = app.add_subcommand("client", "Run one client against a server");
  cli->group("");
  std::string client_id, server_endpoint, data_path;
  std::uint64_t client_seed = 0;
  std::int64_t extra_delay = 0;
  std::optional<int> crash_round;
  cli->add_option("--id", client_id)->required();
  cli->add_option("--server", server_endpoint)->required();
  cli->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  cli->add_option("--seed", client_seed);
  cli->add_option("--extra-delay-ms", extra_delay);
  cli->add_option("--crash-round", crash_round);
  cli->add_option("--log-level", log_level)->check(CLI::IsMember({"debug", "info", "warn", "error"}));

  CLI11_PARSE(app, argc, argv);
  apply_log_level(log_level);

  try {
    if (*run) {
      json doc;
      try {
        doc = json::parse(read_text(run_config));
      } catch (const json::parse_error& e) {
        throw ConfigError({run_config + ": not valid JSON (" + e.what() + ")"});
      }
      if (doc.is_object()) {
        if (run_mode) doc["mode"] = *run_mode;
        if (run_seed) doc["seed"] = *run_seed;
        if (run_out) doc["output_dir"] = *run_out;
      }
      const auto config = experiment::parse_config(doc);
      experiment::RunOptions options;
      options.trace = trace;
      if (transport == "tcp") {
        options.transport = experiment::Transport::kTcp;
        options.launch_clients = [&](const std::string& endpoint, const std::filesystem::path& data_dir) {
          return launch_processes(config, endpoint, data_dir, log_level);
        };
      }
      const auto outcome = experiment::run_experiment(config, options);
      for (const auto& r : outcome.runs) {
        const auto& t = r.report.totals;
        std::cout << protocol::to_string(r.mode) << ": " << t.rounds << " rounds, " << t.uploads << " uploads, "
                  << t.sim_upload_time_ms << " ms upload time, final accuracy " << t.final_acc << "\n";
      }
      if (outcome.comparison) std::cout << "\n" << experiment::comparison_table(*outcome.comparison);
      std::cout << "outputs in " << config.output_dir << "\n";
      return 0;
    }
    if (*cmp) {
      const auto a = json::parse(read_text(report_a));
      const auto b = json::parse(read_text(report_b));
      const auto summary = experiment::compare(a, b);
      if (cmp_json) {
        std::cout << experiment::to_json(summary).dump(2) << "\n";
      } else {
        std::cout << experiment::comparison_table(summary);
      }
      return 0;
    }
    if (*val) {
      const auto config = experiment::load_config(val_config);
      std::cout << experiment::to_json(config).dump(2) << "\n";
      return 0;
    }
    if (*gen) {
      const auto spec = json::parse(read_text(gen_spec));
      const auto data = train::generate_synthetic(spec.value("classes", std::size_t{2}), spec.value("dim", std::size_t{2}),
                                                  spec.value("samples", std::size_t{2800}),
                                                  spec.value("separation", 10.0), spec.value("seed", std::uint64_t{1}));
      train::write_dataset(gen_out, data);
      std::cout << "wrote " << data.size() << " samples to " << gen_out << "\n";
      return 0;
    }
    if (*cli) {
      experiment::TcpClientOptions o;
      o.client.client_id = client_id;
      o.client.trainer.seed = client_seed;
      o.client.trainer.extra_delay_ms = extra_delay;
      o.client.crash_round = crash_round;
      o.server_endpoint = server_endpoint;
      o.data = train::read_dataset(data_path);
      o.resolver = [](const std::string& ref) { return train::read_dataset(ref); };
      const auto status = experiment::run_tcp_client(std::move(o));
      return status == client::ClientStatus::kDone || status == client::ClientStatus::kCrashed ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    return report_config_error(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
