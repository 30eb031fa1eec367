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

#include "dynfed/train/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "dynfed/bytes.hpp"
#include "dynfed/errors.hpp"
#include "dynfed/file_io.hpp"
#include "dynfed/rng.hpp"

namespace dynfed::train {

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Orthonormalizes `vectors` in place (classical Gram-Schmidt, re-orthogonalized once).
void orthonormalize(std::vector<Vec>& vectors) {
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < k; ++j) {
        const double p = dot(vectors[k], vectors[j]);
        for (std::size_t i = 0; i < vectors[k].size(); ++i) vectors[k][i] -= p * vectors[j][i];
      }
    }
    const double norm = std::sqrt(dot(vectors[k], vectors[k]));
    for (auto& x : vectors[k]) x /= norm;
  }
}

std::vector<Vec> random_orthonormal(std::size_t count, std::size_t dim, Rng& rng) {
  std::vector<Vec> basis(count, Vec(dim));
  for (auto& v : basis) {
    for (auto& x : v) x = rng.normal();
  }
  orthonormalize(basis);
  return basis;
}

std::vector<Vec> class_means(std::size_t classes, std::size_t dim, double separation, Rng& rng) {
  std::vector<Vec> means(classes, Vec(dim, 0.0));
  const std::size_t span_dim = classes - 1;
  if (span_dim <= dim) {
    // Centered one-hot vectors form a regular simplex with edge sqrt(2).
    std::vector<Vec> centered(classes, Vec(classes, -1.0 / static_cast<double>(classes)));
    for (std::size_t k = 0; k < classes; ++k) centered[k][k] += 1.0;
    std::vector<Vec> simplex_basis(centered.begin(), centered.begin() + static_cast<std::ptrdiff_t>(span_dim));
    orthonormalize(simplex_basis);
    const auto rotation = random_orthonormal(span_dim, dim, rng);
    const double scale = separation / std::numbers::sqrt2;
    for (std::size_t k = 0; k < classes; ++k) {
      for (std::size_t j = 0; j < span_dim; ++j) {
        const double c = dot(centered[k], simplex_basis[j]) * scale;
        for (std::size_t i = 0; i < dim; ++i) means[k][i] += c * rotation[j][i];
      }
    }
  } else if (dim >= 2) {
    const auto plane = random_orthonormal(2, dim, rng);
    const double radius = separation / (2.0 * std::sin(std::numbers::pi / static_cast<double>(classes)));
    for (std::size_t k = 0; k < classes; ++k) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(classes);
      for (std::size_t i = 0; i < dim; ++i) {
        means[k][i] = radius * (std::cos(theta) * plane[0][i] + std::sin(theta) * plane[1][i]);
      }
    }
  } else {
    for (std::size_t k = 0; k < classes; ++k) {
      means[k][0] = (static_cast<double>(k) - static_cast<double>(classes - 1) / 2.0) * separation;
    }
  }
  return means;
}

}  // namespace

model::Dataset generate_synthetic(std::size_t classes, std::size_t dim, std::size_t pool_size,
                                  double separation, std::uint64_t seed) {
  if (classes < 2) throw PreconditionError("need at least two classes");
  if (dim == 0) throw PreconditionError("dim must be positive");
  if (!(separation > 0.0)) throw PreconditionError("separation must be positive");

  Rng rng(seed);
  const auto means = class_means(classes, dim, separation, rng);
  std::vector<std::size_t> order(pool_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(std::span<std::size_t>(order), rng);

  std::vector<double> features(pool_size * dim);
  std::vector<std::uint32_t> labels(pool_size);
  for (std::size_t n = 0; n < pool_size; ++n) {
    const std::size_t slot = order[n];
    const auto label = static_cast<std::uint32_t>(n % classes);
    labels[slot] = label;
    for (std::size_t i = 0; i < dim; ++i) features[slot * dim + i] = means[label][i] + rng.normal();
  }
  return model::Dataset(dim, classes, std::move(features), std::move(labels));
}

std::vector<std::size_t> class_targets(std::size_t size, std::span<const double> proportions) {
  std::vector<std::size_t> counts(proportions.size());
  std::vector<double> remainder(proportions.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < proportions.size(); ++c) {
    const double exact = static_cast<double>(size) * proportions[c];
    counts[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[c] = exact - static_cast<double>(counts[c]);
    assigned += counts[c];
  }
  std::vector<std::size_t> by_remainder(proportions.size());
  std::iota(by_remainder.begin(), by_remainder.end(), std::size_t{0});
  std::stable_sort(by_remainder.begin(), by_remainder.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < size && k < by_remainder.size(); ++k, ++assigned) {
    ++counts[by_remainder[k]];
  }
  return counts;
}

std::vector<model::Dataset> partition(const model::Dataset& pool, const PartitionPlan& plan) {
  const std::size_t classes = pool.class_count();
  const std::size_t clients = plan.client_sizes.size();
  std::vector<std::string> problems;
  if (clients == 0) problems.emplace_back("partition.client_sizes: at least one client required");
  if (!plan.class_skew.empty() && plan.class_skew.size() != clients) {
    problems.emplace_back("partition.class_skew: need one proportion vector per client");
  }
  for (std::size_t k = 0; k < clients; ++k) {
    if (plan.client_sizes[k] == 0) {
      problems.push_back("partition.client_sizes[" + std::to_string(k) + "]: must be positive");
    }
  }
  for (std::size_t k = 0; k < plan.class_skew.size(); ++k) {
    const auto& p = plan.class_skew[k];
    const std::string where = "partition.class_skew[" + std::to_string(k) + "]";
    if (p.size() != classes) {
      problems.push_back(where + ": expected " + std::to_string(classes) + " proportions");
      continue;
    }
    if (std::any_of(p.begin(), p.end(), [](double x) { return !(x >= 0.0); })) {
      problems.push_back(where + ": proportions must be non-negative");
    }
    if (std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) > 1e-9) {
      problems.push_back(where + ": proportions must sum to 1");
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));

  const std::size_t total = std::accumulate(plan.client_sizes.begin(), plan.client_sizes.end(), std::size_t{0});
  if (total > pool.size()) {
    throw PartitionError("client sizes total " + std::to_string(total) + " but the pool holds only " +
                         std::to_string(pool.size()) + " samples");
  }

  const std::vector<double> uniform(classes, 1.0 / static_cast<double>(classes));
  std::vector<std::vector<std::size_t>> targets(clients);
  std::vector<std::size_t> demand(classes, 0);
  for (std::size_t k = 0; k < clients; ++k) {
    targets[k] = class_targets(plan.client_sizes[k], plan.class_skew.empty() ? uniform : plan.class_skew[k]);
    for (std::size_t c = 0; c < classes; ++c) demand[c] += targets[k][c];
  }

  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < pool.size(); ++i) by_class[pool.label(i)].push_back(i);
  for (std::size_t c = 0; c < classes; ++c) {
    if (demand[c] > by_class[c].size()) {
      throw PartitionError("class " + std::to_string(c) + " is deficient: plan needs " +
                           std::to_string(demand[c]) + " samples, pool has " +
                           std::to_string(by_class[c].size()));
    }
  }

  Rng rng(plan.seed);
  for (auto& members : by_class) shuffle(std::span<std::size_t>(members), rng);
  std::vector<std::size_t> cursor(classes, 0);
  std::vector<model::Dataset> out;
  out.reserve(clients);
  for (std::size_t k = 0; k < clients; ++k) {
    std::vector<std::size_t> picked;
    picked.reserve(plan.client_sizes[k]);
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t n = 0; n < targets[k][c]; ++n) picked.push_back(by_class[c][cursor[c]++]);
    }
    shuffle(std::span<std::size_t>(picked), rng);
    out.push_back(pool.subset(picked));
  }
  return out;
}

std::vector<std::string> fault_problems(const FaultSpec& spec, std::span<const std::string> client_ids,
                                        int fusion_times, std::size_t class_count) {
  std::vector<std::string> problems;
  auto known = [&](const std::string& id) {
    return std::find(client_ids.begin(), client_ids.end(), id) != client_ids.end();
  };
  if (spec.label_flip) {
    const auto& f = *spec.label_flip;
    if (!known(f.client_id)) problems.push_back("faults.label_flip.client: unknown client '" + f.client_id + "'");
    if (!(f.fraction > 0.0 && f.fraction <= 1.0)) problems.emplace_back("faults.label_flip.fraction: must be in (0, 1]");
    if (f.from_class >= class_count || f.to_class >= class_count) {
      problems.emplace_back("faults.label_flip: class index out of range");
    }
  }
  if (spec.slow_client) {
    const auto& s = *spec.slow_client;
    if (!known(s.client_id)) problems.push_back("faults.slow_client.client: unknown client '" + s.client_id + "'");
    if (s.extra_delay_ms < 0) problems.emplace_back("faults.slow_client.extra_delay_ms: must be non-negative");
    if (!(s.delay_multiplier >= 1.0)) problems.emplace_back("faults.slow_client.delay_multiplier: must be >= 1");
  }
  if (spec.crash) {
    const auto& c = *spec.crash;
    if (!known(c.client_id)) problems.push_back("faults.crash.client: unknown client '" + c.client_id + "'");
    if (c.at_round < 1 || c.at_round > fusion_times) {
      problems.emplace_back("faults.crash.at_round: must be within [1, rounds]");
    }
  }
  return problems;
}

FaultedClients apply_faults(std::vector<model::Dataset> datasets, std::vector<TrainerHandle> trainers,
                            std::span<const std::string> client_ids, const FaultSpec& spec,
                            std::uint64_t seed) {
  if (datasets.size() != client_ids.size() || trainers.size() != client_ids.size()) {
    throw PreconditionError("apply_faults needs one dataset and trainer per client");
  }
  auto index_of = [&](const std::string& id) {
    const auto it = std::find(client_ids.begin(), client_ids.end(), id);
    if (it == client_ids.end()) throw PreconditionError("fault references unknown client '" + id + "'");
    return static_cast<std::size_t>(it - client_ids.begin());
  };

  FaultedClients out{std::move(datasets), std::move(trainers), {}};
  out.crash_round.assign(client_ids.size(), std::nullopt);

  if (spec.label_flip) {
    const auto& f = *spec.label_flip;
    auto& data = out.datasets[index_of(f.client_id)];
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.label(i) == f.from_class) rows.push_back(i);
    }
    Rng rng(seed);
    shuffle(std::span<std::size_t>(rows), rng);
    const auto flips = static_cast<std::size_t>(std::llround(f.fraction * static_cast<double>(rows.size())));
    for (std::size_t n = 0; n < flips; ++n) data.set_label(rows[n], f.to_class);
  }
  if (spec.slow_client) {
    const auto& s = *spec.slow_client;
    auto& trainer = out.trainers[index_of(s.client_id)];
    trainer.epoch_cost_ms = static_cast<std::int64_t>(
        std::llround(static_cast<double>(trainer.epoch_cost_ms) * s.delay_multiplier));
    trainer.extra_delay_ms += s.extra_delay_ms;
  }
  if (spec.crash) out.crash_round[index_of(spec.crash->client_id)] = spec.crash->at_round;
  return out;
}

namespace {
constexpr std::string_view kDatasetMagic = "DFDS";
constexpr std::uint32_t kDatasetVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_dataset(const model::Dataset& data) {
  if (data.class_count() > 65536) throw PreconditionError("too many classes for the fixture format");
  std::vector<std::uint8_t> out;
  out.reserve(24 + data.features().size() * 8 + data.size() * 2);
  ByteWriter w(out);
  w.put_bytes(kDatasetMagic);
  w.put_uint<std::uint32_t>(kDatasetVersion);
  w.put_uint<std::uint64_t>(data.size());
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(data.dim()));
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(data.class_count()));
  for (double v : data.features()) w.put_f64(v);
  for (auto l : data.labels()) w.put_uint<std::uint16_t>(static_cast<std::uint16_t>(l));
  return out;
}

model::Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.get_string(4, "magic") != kDatasetMagic) {
    throw DecodeError(DecodeErrorKind::kBadMagic, 0, "expected \"DFDS\"");
  }
  const auto version = r.get_uint<std::uint32_t>("format version");
  if (version != kDatasetVersion) {
    throw DecodeError(DecodeErrorKind::kUnsupportedVersion, 4, "version " + std::to_string(version));
  }
  const auto samples = r.get_uint<std::uint64_t>("sample count");
  const auto dim = r.get_uint<std::uint32_t>("dim");
  const auto classes = r.get_uint<std::uint32_t>("class count");
  if (dim != 0 && samples > r.remaining() / (8ULL * dim + 2)) {
    throw DecodeError(DecodeErrorKind::kTruncated, r.offset(), "sample count exceeds the buffer");
  }
  std::vector<double> features(samples * dim);
  for (auto& v : features) v = r.get_f64("feature");
  std::vector<std::uint32_t> labels(samples);
  for (auto& l : labels) {
    const std::size_t at = r.offset();
    l = r.get_uint<std::uint16_t>("label");
    if (l >= classes) throw DecodeError(DecodeErrorKind::kBadLayout, at, "label out of range");
  }
  if (r.remaining() != 0) throw DecodeError(DecodeErrorKind::kTrailingBytes, r.offset(), "");
  return model::Dataset(dim, classes, std::move(features), std::move(labels));
}

void write_dataset(const std::filesystem::path& path, const model::Dataset& data) {
  write_file(path, encode_dataset(data));
}

model::Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

}  // namespace dynfed::train
