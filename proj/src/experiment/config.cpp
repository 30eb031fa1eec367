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

#include <cmath>
#include <limits>
#include <set>

#include "dynfed/errors.hpp"
#include "dynfed/experiment/experiment.hpp"
#include "dynfed/file_io.hpp"
#include "dynfed/rng.hpp"

namespace dynfed::experiment {

using nlohmann::json;

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kDefault: return "D_FL";
    case RunMode::kDynamicFusion: return "DF_FL";
    case RunMode::kBoth: return "both";
  }
  return "unknown";
}

RunMode parse_run_mode(std::string_view text, std::string_view field) {
  if (text == "D_FL") return RunMode::kDefault;
  if (text == "DF_FL") return RunMode::kDynamicFusion;
  if (text == "both") return RunMode::kBoth;
  throw ConfigError({std::string(field) + ": expected D_FL, DF_FL or both, got '" + std::string(text) + "'"});
}

model::ModelSpec ExperimentConfig::model_spec() const {
  model::ModelSpec spec;
  spec.kind = model_kind;
  spec.input_dim = data.dim;
  spec.hidden_dims = hidden_dims;
  spec.class_count = data.classes;
  spec.padding = padding;
  return spec;
}

std::int64_t ExperimentConfig::resolved_initial_waiting_ms() const {
  if (initial_waiting_time_ms) return *initial_waiting_time_ms;
  return std::max<std::int64_t>(1, 2 * static_cast<std::int64_t>(epochs) * epoch_cost_ms);
}

std::vector<std::string> ExperimentConfig::client_ids() const {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < client_count; ++i) ids.push_back("client-" + std::to_string(i + 1));
  return ids;
}

json to_json(const ExperimentConfig& c) {
  json faults = json::object();
  if (c.faults.label_flip) {
    const auto& f = *c.faults.label_flip;
    faults["label_flip"] = {
        {"client", f.client_id}, {"fraction", f.fraction}, {"from_class", f.from_class}, {"to_class", f.to_class}};
  }
  if (c.faults.slow_client) {
    const auto& s = *c.faults.slow_client;
    faults["slow_client"] = {
        {"client", s.client_id}, {"extra_delay_ms", s.extra_delay_ms}, {"delay_multiplier", s.delay_multiplier}};
  }
  if (c.faults.crash) {
    faults["crash"] = {{"client", c.faults.crash->client_id}, {"at_round", c.faults.crash->at_round}};
  }
  return json{
      {"seed", c.seed},
      {"mode", std::string(to_string(c.mode))},
      {"rounds", c.rounds},
      {"epochs", c.epochs},
      {"lr", c.lr},
      {"batch_size", c.batch_size},
      {"model",
       {{"kind", std::string(model::to_string(c.model_kind))}, {"hidden_dims", c.hidden_dims}, {"padding", c.padding}}},
      {"data",
       {{"classes", c.data.classes},
        {"dim", c.data.dim},
        {"pool_size", c.data.pool_size},
        {"separation", c.data.separation},
        {"validation_size", c.data.validation_size}}},
      {"client_count", c.client_count},
      {"partition", {{"client_sizes", c.client_sizes}, {"class_skew", c.class_skew}}},
      {"faults", faults},
      {"link", {{"bandwidth_bytes_per_s", c.link.bandwidth_bytes_per_s}, {"latency_ms", c.link.latency_ms}}},
      {"slack", c.slack},
      {"deadline_policy", std::string(protocol::to_string(c.deadline))},
      {"participation_policy", std::string(protocol::to_string(c.participation))},
      {"dispatch_policy", std::string(protocol::to_string(c.dispatch))},
      {"aggregation", std::string(model::to_string(c.aggregation))},
      {"epoch_cost_ms", c.epoch_cost_ms},
      {"initial_waiting_time_ms", c.resolved_initial_waiting_ms()},
      {"round_timeout_ms", c.round_timeout_ms},
      {"output_dir", c.output_dir},
  };
}

namespace {

// Reads typed fields out of a JSON object, recording problems instead of
// stopping at the first one.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& problems) : problems_(problems) {}

  bool object(const json& doc, const std::string& path, std::initializer_list<const char*> keys) {
    if (!doc.is_object()) {
      problems_.push_back((path.empty() ? std::string("config") : path) + ": expected an object");
      return false;
    }
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : doc.items()) {
      if (!allowed.contains(key)) problems_.push_back(join(path, key) + ": unknown key");
    }
    return true;
  }

  template <typename T>
  void integer(const json& obj, const std::string& path, const char* key, T& out, long double min,
               long double max = static_cast<long double>(std::numeric_limits<T>::max())) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const std::string name = join(path, key);
    if (!v.is_number_integer()) {
      problems_.push_back(name + ": expected an integer");
      return;
    }
    const long double x = v.is_number_unsigned() ? static_cast<long double>(v.get<std::uint64_t>())
                                                 : static_cast<long double>(v.get<std::int64_t>());
    if (x < min || x > max) {
      problems_.push_back(name + ": must be in [" + fmt(min) + ", " + fmt(max) + "], got " + v.dump());
      return;
    }
    out = v.is_number_unsigned() ? static_cast<T>(v.get<std::uint64_t>()) : static_cast<T>(v.get<std::int64_t>());
  }

  void number(const json& obj, const std::string& path, const char* key, double& out, double min, double max,
              bool min_exclusive = false) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const std::string name = join(path, key);
    if (!v.is_number()) {
      problems_.push_back(name + ": expected a number");
      return;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < min || x > max || (min_exclusive && x == min)) {
      problems_.push_back(name + ": must be in " + std::string(min_exclusive ? "(" : "[") + fmt(min) + ", " +
                          fmt(max) + "], got " + v.dump());
      return;
    }
    out = x;
  }

  template <typename F>
  void text(const json& obj, const std::string& path, const char* key, F&& assign) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const std::string name = join(path, key);
    if (!v.is_string()) {
      problems_.push_back(name + ": expected a string");
      return;
    }
    try {
      assign(v.get<std::string>(), name);
    } catch (const ConfigError& e) {
      problems_.insert(problems_.end(), e.problems().begin(), e.problems().end());
    } catch (const Error& e) {
      problems_.push_back(name + ": " + e.what());
    }
  }

  void sizes(const json& obj, const std::string& path, const char* key, std::vector<std::size_t>& out,
             std::size_t min) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const std::string name = join(path, key);
    if (!v.is_array()) {
      problems_.push_back(name + ": expected an array of integers");
      return;
    }
    std::vector<std::size_t> values;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& e = v[i];
      if (!e.is_number_integer() || (e.is_number_integer() && !e.is_number_unsigned() && e.get<std::int64_t>() < 0) ||
          e.get<std::uint64_t>() < min) {
        problems_.push_back(name + "[" + std::to_string(i) + "]: expected an integer >= " + std::to_string(min));
        return;
      }
      values.push_back(e.get<std::size_t>());
    }
    out = std::move(values);
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  static std::string fmt(long double x) {
    if (x >= static_cast<long double>(std::numeric_limits<std::int64_t>::max())) return "max";
    if (x == std::floor(x)) return std::to_string(static_cast<std::int64_t>(x));
    return json(static_cast<double>(x)).dump();
  }

  std::vector<std::string>& problems_;
};

void read_faults(Reader& r, const json& doc, ExperimentConfig& c) {
  if (!r.object(doc, "faults", {"label_flip", "slow_client", "crash"})) return;
  auto read_client = [&](const json& obj, const std::string& path, std::string& out) {
    r.text(obj, path, "client", [&](const std::string& v, const std::string&) { out = v; });
  };
  if (doc.contains("label_flip") && !doc["label_flip"].is_null()) {
    const auto& f = doc["label_flip"];
    if (r.object(f, "faults.label_flip", {"client", "fraction", "from_class", "to_class"})) {
      train::LabelFlip flip;
      read_client(f, "faults.label_flip", flip.client_id);
      r.number(f, "faults.label_flip", "fraction", flip.fraction, 0.0, 1.0, true);
      r.integer(f, "faults.label_flip", "from_class", flip.from_class, 0);
      r.integer(f, "faults.label_flip", "to_class", flip.to_class, 0);
      c.faults.label_flip = flip;
    }
  }
  if (doc.contains("slow_client") && !doc["slow_client"].is_null()) {
    const auto& s = doc["slow_client"];
    if (r.object(s, "faults.slow_client", {"client", "extra_delay_ms", "delay_multiplier"})) {
      train::SlowClient slow;
      read_client(s, "faults.slow_client", slow.client_id);
      r.integer(s, "faults.slow_client", "extra_delay_ms", slow.extra_delay_ms, 0);
      r.number(s, "faults.slow_client", "delay_multiplier", slow.delay_multiplier, 1.0, 1e6);
      c.faults.slow_client = slow;
    }
  }
  if (doc.contains("crash") && !doc["crash"].is_null()) {
    const auto& k = doc["crash"];
    if (r.object(k, "faults.crash", {"client", "at_round"})) {
      train::Crash crash;
      read_client(k, "faults.crash", crash.client_id);
      r.integer(k, "faults.crash", "at_round", crash.at_round, 1);
      c.faults.crash = crash;
    }
  }
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  std::vector<std::string> problems;
  Reader r(problems);
  ExperimentConfig c;
  if (!r.object(doc, "",
                {"seed", "mode", "rounds", "epochs", "lr", "batch_size", "model", "data", "client_count", "partition",
                 "faults", "link", "slack", "deadline_policy", "participation_policy", "dispatch_policy",
                 "aggregation", "epoch_cost_ms", "initial_waiting_time_ms", "round_timeout_ms", "output_dir"})) {
    throw ConfigError(std::move(problems));
  }

  r.integer(doc, "", "seed", c.seed, 0);
  r.text(doc, "", "mode", [&](const std::string& v, const std::string& n) { c.mode = parse_run_mode(v, n); });
  r.integer(doc, "", "rounds", c.rounds, 1, 1'000'000);
  r.integer(doc, "", "epochs", c.epochs, 1, 1'000'000);
  r.number(doc, "", "lr", c.lr, 0.0, 1e6, true);
  r.integer(doc, "", "batch_size", c.batch_size, 1);

  if (doc.contains("model") && r.object(doc["model"], "model", {"kind", "hidden_dims", "padding"})) {
    const auto& m = doc["model"];
    r.text(m, "model", "kind", [&](const std::string& v, const std::string& n) {
      try {
        c.model_kind = model::parse_model_kind(v);
      } catch (const Error&) {
        throw ConfigError({n + ": expected logistic-regression or mlp, got '" + v + "'"});
      }
    });
    r.sizes(m, "model", "hidden_dims", c.hidden_dims, 1);
    r.integer(m, "model", "padding", c.padding, 0, 1e9);
  }
  if (doc.contains("data") &&
      r.object(doc["data"], "data", {"classes", "dim", "pool_size", "separation", "validation_size"})) {
    const auto& d = doc["data"];
    r.integer(d, "data", "classes", c.data.classes, 2, 65535);
    r.integer(d, "data", "dim", c.data.dim, 1, 1e6);
    r.integer(d, "data", "pool_size", c.data.pool_size, 1, 1e8);
    r.number(d, "data", "separation", c.data.separation, 0.0, 1e9, true);
    r.integer(d, "data", "validation_size", c.data.validation_size, 1, 1e8);
  }
  r.integer(doc, "", "client_count", c.client_count, 1, 10'000);
  if (doc.contains("partition") && r.object(doc["partition"], "partition", {"client_sizes", "class_skew"})) {
    const auto& p = doc["partition"];
    r.sizes(p, "partition", "client_sizes", c.client_sizes, 1);
    if (p.contains("class_skew")) {
      const auto& skew = p["class_skew"];
      bool ok = skew.is_array();
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; ok && i < skew.size(); ++i) {
        ok = skew[i].is_array();
        std::vector<double> row;
        for (std::size_t j = 0; ok && j < skew[i].size(); ++j) {
          ok = skew[i][j].is_number();
          if (ok) row.push_back(skew[i][j].get<double>());
        }
        rows.push_back(std::move(row));
      }
      if (ok) {
        c.class_skew = std::move(rows);
      } else {
        problems.emplace_back("partition.class_skew: expected an array of number arrays");
      }
    }
  }
  if (doc.contains("faults") && !doc["faults"].is_null()) read_faults(r, doc["faults"], c);
  if (doc.contains("link") && r.object(doc["link"], "link", {"bandwidth_bytes_per_s", "latency_ms"})) {
    r.integer(doc["link"], "link", "bandwidth_bytes_per_s", c.link.bandwidth_bytes_per_s, 1);
    r.integer(doc["link"], "link", "latency_ms", c.link.latency_ms, 0);
  }
  r.number(doc, "", "slack", c.slack, 1.0, 1e6);
  r.text(doc, "", "deadline_policy",
         [&](const std::string& v, const std::string& n) { c.deadline = protocol::parse_deadline_policy(v, n); });
  r.text(doc, "", "participation_policy", [&](const std::string& v, const std::string& n) {
    c.participation = protocol::parse_participation_policy(v, n);
  });
  r.text(doc, "", "dispatch_policy",
         [&](const std::string& v, const std::string& n) { c.dispatch = protocol::parse_dispatch_policy(v, n); });
  r.text(doc, "", "aggregation", [&](const std::string& v, const std::string& n) {
    try {
      c.aggregation = model::parse_aggregation_mode(v);
    } catch (const Error&) {
      throw ConfigError({n + ": expected unweighted or sample-weighted, got '" + v + "'"});
    }
  });
  r.integer(doc, "", "epoch_cost_ms", c.epoch_cost_ms, 1);
  if (doc.contains("initial_waiting_time_ms") && !doc["initial_waiting_time_ms"].is_null()) {
    std::int64_t w = 0;
    r.integer(doc, "", "initial_waiting_time_ms", w, 1);
    if (w > 0) c.initial_waiting_time_ms = w;
  }
  r.integer(doc, "", "round_timeout_ms", c.round_timeout_ms, 1);
  r.text(doc, "", "output_dir", [&](const std::string& v, const std::string& n) {
    if (v.empty()) throw ConfigError({n + ": must not be empty"});
    c.output_dir = v;
  });

  // Cross-field checks.
  if (c.client_sizes.size() != c.client_count) {
    problems.push_back("partition.client_sizes: has " + std::to_string(c.client_sizes.size()) +
                       " entries but client_count is " + std::to_string(c.client_count));
  }
  if (!c.class_skew.empty()) {
    if (c.class_skew.size() != c.client_count) {
      problems.emplace_back("partition.class_skew: needs one proportion vector per client");
    }
    for (std::size_t i = 0; i < c.class_skew.size(); ++i) {
      const auto& row = c.class_skew[i];
      double sum = 0.0;
      bool negative = false;
      for (double p : row) {
        sum += p;
        negative = negative || p < 0.0 || !std::isfinite(p);
      }
      const std::string name = "partition.class_skew[" + std::to_string(i) + "]";
      if (row.size() != c.data.classes) {
        problems.push_back(name + ": needs " + std::to_string(c.data.classes) + " proportions");
      } else if (negative || std::abs(sum - 1.0) > 1e-9) {
        problems.push_back(name + ": proportions must be non-negative and sum to 1");
      }
    }
  }
  if (c.model_kind == model::ModelKind::kLogisticRegression && !c.hidden_dims.empty()) {
    problems.emplace_back("model.hidden_dims: logistic-regression takes no hidden layers");
  }
  if (c.model_kind == model::ModelKind::kMlp && c.hidden_dims.empty()) {
    problems.emplace_back("model.hidden_dims: mlp needs at least one hidden layer");
  }
  const auto ids = c.client_ids();
  const auto fault_issues = train::fault_problems(c.faults, ids, c.rounds, c.data.classes);
  problems.insert(problems.end(), fault_issues.begin(), fault_issues.end());

  // Partition feasibility only makes sense once the shape is sound.
  if (problems.empty()) {
    try {
      prepare_data(c);
    } catch (const PartitionError& e) {
      problems.push_back(std::string("partition: ") + e.what());
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) problems.push_back("partition: " + p);
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError({path.string() + ": file not found"});
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError({path.string() + ": not valid JSON (" + e.what() + ")"});
  }
  return parse_config(doc);
}

PreparedData prepare_data(const ExperimentConfig& c) {
  PreparedData out;
  out.client_ids = c.client_ids();
  // Pool and validation rows come from one draw so they share class means.
  const auto all = train::generate_synthetic(c.data.classes, c.data.dim, c.data.pool_size + c.data.validation_size,
                                             c.data.separation, derive_seed(c.seed, 1));
  // The pool keeps the balanced class counts a pool-sized draw would have.
  std::vector<std::size_t> quota(c.data.classes, c.data.pool_size / c.data.classes);
  for (std::size_t k = 0; k < c.data.pool_size % c.data.classes; ++k) ++quota[k];
  std::vector<std::size_t> pool_rows;
  std::vector<std::size_t> validation_rows;
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto& left = quota[all.label(i)];
    if (left > 0) {
      --left;
      pool_rows.push_back(i);
    } else {
      validation_rows.push_back(i);
    }
  }
  const auto pool = all.subset(pool_rows);
  out.validation = all.subset(validation_rows);
  train::PartitionPlan plan{c.client_sizes, c.class_skew, derive_seed(c.seed, 3)};
  auto datasets = train::partition(pool, plan);

  std::vector<train::TrainerHandle> trainers;
  for (std::size_t i = 0; i < c.client_count; ++i) {
    train::TrainerHandle t;
    t.spec = c.model_spec();
    t.lr = c.lr;
    t.batch_size = c.batch_size;
    t.epoch_cost_ms = c.epoch_cost_ms;
    t.seed = derive_seed(c.seed, 5, i);
    trainers.push_back(t);
  }
  auto faulted = train::apply_faults(std::move(datasets), std::move(trainers), out.client_ids, c.faults,
                                     derive_seed(c.seed, 6));
  out.client_data = std::move(faulted.datasets);
  out.trainers = std::move(faulted.trainers);
  out.crash_round = std::move(faulted.crash_round);
  return out;
}

server::JobConfig job_config(const ExperimentConfig& c, protocol::JobMode mode) {
  server::JobConfig j;
  j.job_id = "job-" + std::to_string(c.seed);
  j.rounds = c.rounds;
  j.epochs = c.epochs;
  j.lr = c.lr;
  j.batch_size = c.batch_size;
  j.model_spec = c.model_spec();
  j.initial_waiting_time_ms = c.resolved_initial_waiting_ms();
  j.mode = mode;
  j.participation = c.participation;
  j.dispatch = c.dispatch;
  j.init_seed = derive_seed(c.seed, 4);
  return j;
}

server::ServerOptions server_options(const ExperimentConfig& c) {
  server::ServerOptions o;
  o.expected_clients = c.client_count;
  o.slack = c.slack;
  o.deadline = c.deadline;
  o.aggregation = c.aggregation;
  o.default_round_timeout_ms = c.round_timeout_ms;
  return o;
}

}  // namespace dynfed::experiment
