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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Registered with ctest.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynfed/errors.hpp"
#include "dynfed/experiment/experiment.hpp"
#include "dynfed/file_io.hpp"
#include "dynfed/log.hpp"
#include "dynfed/model/fedavg.hpp"
#include "dynfed/model/serialize.hpp"
#include "dynfed/protocol/codec.hpp"
#include "dynfed/train/trainer.hpp"
#include "support/test_support.hpp"

using namespace dynfed;
using namespace dynfed::experiment;
using protocol::JobMode;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail = what;
      pass = false;
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1. fedavg against the brute-force mean.
Verdict fedavg_oracle() {
  Verdict v;
  const auto start = Clock::now();
  testing::Gen g(101);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = g.size(2, 8);
    const std::size_t n = t < 10 ? 100'000 : g.size(1, 100'000);
    std::vector<std::vector<double>> raw;
    std::vector<model::ParameterVector> vs;
    std::vector<std::uint64_t> counts;
    for (std::size_t i = 0; i < k; ++i) {
      raw.push_back(g.vector(n));
      vs.emplace_back(model::Layout{{"w", 0, n}}, raw.back());
      counts.push_back(g.size(1, 5000));
    }
    std::vector<model::Contribution> list;
    for (std::size_t i = 0; i < k; ++i) list.push_back({&vs[i], counts[i]});
    for (bool weighted : {false, true}) {
      const auto out = model::fedavg(
          list, weighted ? model::AggregationMode::kSampleWeighted : model::AggregationMode::kUnweighted);
      const auto oracle = testing::oracle_mean(raw, counts, weighted);
      for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(out.values()[j] - oracle[j]));
    }
  }
  const double secs = seconds_since(start);
  v.require(worst <= 1e-12, fmt("max deviation %.3g > 1e-12", worst));
  v.require(secs < 10, fmt("took %.1f s", secs));
  if (v.pass) v.detail = fmt("200 cases, max deviation %.3g", worst) + fmt(", %.1f s", secs);
  return v;
}

// Skewed, harder blobs where local accuracies differ enough for DF_FL to skip.
ExperimentConfig skewed_config(std::uint64_t seed, bool skewed) {
  ExperimentConfig c;
  c.seed = seed;
  c.data.separation = 3.0;
  c.data.pool_size = 4200;
  if (skewed) {
    // Redraw until neither class is asked for more than the balanced pool holds.
    testing::Gen g(seed * 7919);
    const double per_class = c.data.pool_size / 2.0 - 3;
    for (;;) {
      c.class_skew.clear();
      double class0 = 0, class1 = 0;
      for (int i = 0; i < 3; ++i) {
        const double p = g.real(0.1, 0.9);
        c.class_skew.push_back({p, 1.0 - p});
        class0 += p * c.client_sizes[i];
        class1 += (1.0 - p) * c.client_sizes[i];
      }
      if (class0 <= per_class && class1 <= per_class) break;
    }
  }
  return c;
}

// 2. DF_FL never uploads more than D_FL, and usually fewer on skewed data.
Verdict upload_reduction() {
  Verdict v;
  const auto start = Clock::now();
  int skewed_total = 0, skewed_reduced = 0;
  std::size_t df_sum = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const bool skewed = seed <= 40;
    const auto c = skewed_config(seed, skewed);
    const auto data = prepare_data(c);
    const auto d = run_simulation(c, JobMode::kDefault, data);
    const auto f = run_simulation(c, JobMode::kDynamicFusion, data);
    const auto du = d.report.totals.uploads, fu = f.report.totals.uploads;
    df_sum += fu;
    v.require(du == 90, "seed " + std::to_string(seed) + ": D_FL uploads " + std::to_string(du));
    v.require(fu <= du, "seed " + std::to_string(seed) + ": DF_FL uploads exceed D_FL");
    if (skewed) {
      ++skewed_total;
      skewed_reduced += fu < 90 ? 1 : 0;
    }
  }
  const double share = static_cast<double>(skewed_reduced) / skewed_total;
  const double secs = seconds_since(start);
  v.require(share >= 0.9, fmt("only %.0f%% of skewed seeds reduced uploads", 100 * share));
  v.require(secs < 120, fmt("took %.1f s", secs));
  if (v.pass) {
    v.detail = std::to_string(skewed_reduced) + "/" + std::to_string(skewed_total) +
               " skewed seeds below 90, mean DF_FL uploads " + fmt("%.1f", df_sum / 50.0) + fmt(", %.1f s", secs);
  }
  return v;
}

// 3. Upload-time ratio equals upload-count ratio at three model sizes.
Verdict upload_time_ratio() {
  Verdict v;
  const std::size_t target_bytes[] = {100'000, 4'000'000, 40'000'000};
  std::vector<std::int64_t> savings;
  std::vector<std::size_t> df_counts;
  std::string detail;
  for (auto bytes : target_bytes) {
    auto c = skewed_config(3, true);
    c.rounds = 10;
    c.epoch_cost_ms = 1000;  // keeps deadlines longer than a 40 MB transfer
    c.padding = bytes / 8;
    const auto data = prepare_data(c);
    const auto d = run_simulation(c, JobMode::kDefault, data);
    const auto f = run_simulation(c, JobMode::kDynamicFusion, data);
    const auto& dt = d.report.totals;
    const auto& ft = f.report.totals;
    const auto model_bytes = model::encoded_size(c.model_spec().layout());
    // exact rational equality: DF_time / D_time == DF_count / D_count
    v.require(static_cast<__int128>(ft.sim_upload_time_ms) * dt.uploads ==
                  static_cast<__int128>(dt.sim_upload_time_ms) * ft.uploads,
              std::to_string(bytes) + " B: time ratio differs from count ratio");
    v.require(ft.uploads < dt.uploads, std::to_string(bytes) + " B: no uploads were skipped");
    df_counts.push_back(ft.uploads);
    savings.push_back(dt.sim_upload_time_ms - ft.sim_upload_time_ms);
    detail += (detail.empty() ? "" : "; ") + fmt("%.1f MB model", model_bytes / 1e6) + ": " + std::to_string(ft.uploads) +
              "/" + std::to_string(dt.uploads) + " uploads, " + std::to_string(ft.sim_upload_time_ms) + "/" +
              std::to_string(dt.sim_upload_time_ms) + " ms";
  }
  v.require(df_counts[0] == df_counts[1] && df_counts[1] == df_counts[2], "skip counts differ across sizes");
  v.require(savings[0] < savings[1] && savings[1] < savings[2], "savings do not grow with model size");
  if (v.pass) v.detail = detail;
  return v;
}

// 4. A client 2.5x slower than its peers misses the deadline.
Verdict straggler_exclusion() {
  Verdict v;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    ExperimentConfig c;
    c.seed = seed;
    c.slack = 1.2;
    c.faults.slow_client = train::SlowClient{"client-3", 0, 2.5};
    const auto r = run_simulation(c, JobMode::kDynamicFusion, prepare_data(c));
    int late = 0;
    for (const auto& o : r.report.outcomes) {
      if (!o.excluded_late.contains("client-3")) continue;
      ++late;
      v.require(o.aggregated && o.participants == std::set<std::string>{"client-1", "client-2"},
                "seed " + std::to_string(seed) + " round " + std::to_string(o.round) + " did not aggregate 1 and 2");
    }
    v.require(late >= 28, "seed " + std::to_string(seed) + ": late in only " + std::to_string(late) + " rounds");
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + ": " +
              std::to_string(late) + "/30 late";
  }
  if (v.pass) v.detail = detail;
  return v;
}

// 5. Losing a client at round 10 does not stop the job.
Verdict fault_tolerance() {
  Verdict v;
  ExperimentConfig c;
  c.faults.crash = train::Crash{"client-2", 10};
  const auto data = prepare_data(c);
  std::string detail;
  for (auto mode : {JobMode::kDefault, JobMode::kDynamicFusion}) {
    const auto r = run_simulation(c, mode, data);
    const auto name = std::string(protocol::to_string(mode));
    v.require(r.report.outcomes.size() == 30, name + ": " + std::to_string(r.report.outcomes.size()) + " rounds");
    v.require(r.report.totals.final_acc >= 0.95, name + fmt(": final accuracy %.4f", r.report.totals.final_acc));
    detail += (detail.empty() ? "" : ", ") + name + fmt(" %.4f", r.report.totals.final_acc);
  }
  if (v.pass) v.detail = "30 rounds, final accuracy " + detail;
  return v;
}

// 6. Half of client 2's class-0 labels flipped to class 1.
Verdict label_flip() {
  Verdict v;
  std::vector<double> df, dd;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ExperimentConfig c;
    c.seed = seed;
    c.data.separation = 4.0;
    c.faults.label_flip = train::LabelFlip{"client-2", 0.5, 0, 1};
    const auto data = prepare_data(c);
    const double d = run_simulation(c, JobMode::kDefault, data).report.totals.final_acc;
    const double f = run_simulation(c, JobMode::kDynamicFusion, data).report.totals.final_acc;
    dd.push_back(d);
    df.push_back(f);
    v.require(f >= d - 0.02, "seed " + std::to_string(seed) + fmt(": DF_FL %.4f", f) + fmt(" vs D_FL %.4f", d));
  }
  const auto medians = fmt("median DF_FL %.4f", median(df)) + fmt(", median D_FL %.4f over 20 seeds", median(dd));
  v.detail = v.pass ? medians : v.detail + "; " + medians;
  return v;
}

// 7. Both modes converge on well-separated blobs.
Verdict convergence() {
  Verdict v;
  ExperimentConfig c;
  const auto data = prepare_data(c);
  std::string detail;
  for (auto mode : {JobMode::kDefault, JobMode::kDynamicFusion}) {
    const auto start = Clock::now();
    const auto r = run_simulation(c, mode, data);
    const double secs = seconds_since(start);
    const auto name = std::string(protocol::to_string(mode));
    v.require(r.report.totals.final_acc >= 0.95, name + fmt(": accuracy %.4f", r.report.totals.final_acc));
    v.require(secs < 60, name + fmt(": %.1f s", secs));
    detail += (detail.empty() ? "" : ", ") + name + fmt(" acc %.4f", r.report.totals.final_acc) + fmt(" in %.1f s", secs);
  }
  if (v.pass) v.detail = detail;
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8. Same config and seed, same bytes.
Verdict determinism() {
  Verdict v;
  const auto root = std::filesystem::temp_directory_path() / "dynfed_acceptance_determinism";
  std::vector<ExperimentConfig> configs(2);
  configs[1] = skewed_config(9, true);
  configs[1].faults.slow_client = train::SlowClient{"client-1", 500, 1.5};
  configs[1].faults.label_flip = train::LabelFlip{"client-2", 0.3, 1, 0};
  int compared = 0;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    std::vector<std::vector<std::uint64_t>> hashes;
    for (int rep = 0; rep < 2; ++rep) {
      auto c = configs[k];
      c.output_dir = (root / std::to_string(rep)).string();
      std::filesystem::remove_all(c.output_dir);
      RunOptions o;
      o.trace = true;
      const auto outcome = run_experiment(c, o);
      hashes.emplace_back();
      for (const auto& r : outcome.runs) hashes.back().push_back(r.trace_hash);
    }
    v.require(hashes[0] == hashes[1], "config " + std::to_string(k) + ": trace hashes differ");
    for (const char* mode : {"D_FL", "DF_FL"}) {
      for (const char* file : {"metrics.csv", "report.json", "final_model.dfpv", "trace.jsonl"}) {
        const auto a = slurp(root / "0" / mode / file);
        const auto b = slurp(root / "1" / mode / file);
        // the echoed output_dir is the only thing allowed to differ
        if (std::string(file) == "report.json") {
          auto ja = nlohmann::json::parse(a), jb = nlohmann::json::parse(b);
          ja["config"].erase("output_dir");
          jb["config"].erase("output_dir");
          v.require(ja.dump() == jb.dump(), "config " + std::to_string(k) + ": " + mode + "/" + file + " differs");
        } else {
          v.require(!a.empty() && a == b, "config " + std::to_string(k) + ": " + mode + "/" + file + " differs");
        }
        ++compared;
      }
    }
  }
  std::filesystem::remove_all(root);
  if (v.pass) v.detail = std::to_string(compared) + " output files identical, trace hashes equal";
  return v;
}

// 9. Analytic gradients against central differences of an independent loss.
Verdict gradient_check() {
  Verdict v;
  testing::Gen g(909);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    model::ModelSpec spec;
    spec.kind = t % 2 ? model::ModelKind::kMlp : model::ModelKind::kLogisticRegression;
    spec.input_dim = g.size(1, 5);
    if (spec.kind == model::ModelKind::kMlp) spec.hidden_dims = {g.size(1, 5)};
    spec.class_count = g.size(2, 4);
    std::vector<double> p = g.vector(spec.active_parameter_count(), 0.7);
    const auto data = testing::random_dataset(g, g.size(1, 16), spec.input_dim, spec.class_count);
    std::vector<std::size_t> batch(data.size());
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
    std::vector<double> grad(p.size());
    train::loss_and_gradient(spec, p, data, batch, grad);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double keep = p[j];
      p[j] = keep + 1e-5;
      const double up = testing::oracle_loss(spec, p, data, batch);
      p[j] = keep - 1e-5;
      const double down = testing::oracle_loss(spec, p, data, batch);
      p[j] = keep;
      const double fd = (up - down) / 2e-5;
      worst = std::max(worst, std::abs(fd - grad[j]) / std::max({1e-6, std::abs(fd), std::abs(grad[j])}));
    }
  }
  v.require(worst < 1e-4, fmt("max relative error %.3g", worst));
  if (v.pass) v.detail = fmt("100 instances, max relative error %.3g", worst);
  return v;
}

// 10. Golden files and the mutated corpus.
Verdict wire_format() {
  Verdict v;
  const std::filesystem::path golden = DYNFED_GOLDEN_DIR;
  const auto manifest = nlohmann::json::parse(slurp(golden / "manifest.json"));
  auto bytes_of = [&](const std::string& rel) {
    const auto s = slurp(golden / rel);
    return std::vector<std::uint8_t>(s.begin(), s.end());
  };
  int goldens = 0, rejected = 0;
  for (const auto& e : manifest["params"]) {
    const auto b = bytes_of(e["file"]);
    const auto p = model::deserialize_params(b);
    bool bits_ok = p.size() == e["values_bits"].size();
    for (std::size_t i = 0; bits_ok && i < p.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &p.values()[i], 8);
      bits_ok = bits == std::stoull(e["values_bits"][i].get<std::string>(), nullptr, 16);
    }
    v.require(bits_ok && model::serialize_params(p) == b, e["file"].get<std::string>() + " does not round-trip");
    ++goldens;
  }
  for (const auto& e : manifest["frames"]) {
    const auto b = bytes_of(e["file"]);
    const auto m = protocol::frame_decode(b);
    v.require(protocol::type_name(m) == e["type"].get<std::string>() && protocol::frame_encode(m) == b,
              e["file"].get<std::string>() + " does not round-trip");
    ++goldens;
  }
  for (const auto& e : manifest["corrupt"]) {
    const auto b = bytes_of(e["file"]);
    std::string kind = "accepted";
    try {
      if (e["decoder"] == "params") {
        model::deserialize_params(b);
      } else {
        protocol::frame_decode(b);
      }
    } catch (const DecodeError& err) {
      kind = std::string(to_string(err.kind()));
    }
    const bool ok = kind == e["kind"].get<std::string>();
    v.require(ok, e["file"].get<std::string>() + ": got " + kind);
    rejected += ok ? 1 : 0;
  }
  v.require(rejected == 20, std::to_string(rejected) + " corpus files rejected as documented");
  if (v.pass) {
    v.detail = std::to_string(goldens) + " golden files round-trip, " + std::to_string(rejected) +
               "/20 corpus files rejected with the documented kind";
  }
  return v;
}

}  // namespace

int main() {
  log::set_level(log::Level::kError);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"fedavg oracle", fedavg_oracle},
      {"upload reduction", upload_reduction},
      {"upload time ratio", upload_time_ratio},
      {"straggler exclusion", straggler_exclusion},
      {"fault tolerance", fault_tolerance},
      {"label-flip robustness", label_flip},
      {"convergence", convergence},
      {"determinism", determinism},
      {"gradient check", gradient_check},
      {"wire format", wire_format},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s  %2zu %-22s %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
