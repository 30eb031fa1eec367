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

#include <algorithm>
#include <cmath>
#include <cstring>

#include "dynfed/errors.hpp"
#include "dynfed/model/dataset.hpp"
#include "dynfed/model/evaluate.hpp"
#include "dynfed/model/fedavg.hpp"
#include "dynfed/model/model_spec.hpp"
#include "dynfed/model/parameter_vector.hpp"
#include "dynfed/model/serialize.hpp"
#include "dynfed/net/transport.hpp"
#include "support/test_support.hpp"

using namespace dynfed;
using model::AggregationMode;
using model::Contribution;
using model::ParameterVector;

namespace {

ParameterVector vec(std::vector<double> values) {
  const auto n = values.size();
  return ParameterVector({{"w", 0, n}}, std::move(values));
}

ParameterVector run_fedavg(const std::vector<ParameterVector>& vs, const std::vector<std::uint64_t>& counts,
                           AggregationMode mode) {
  std::vector<Contribution> c;
  for (std::size_t i = 0; i < vs.size(); ++i) c.push_back({&vs[i], counts[i]});
  return model::fedavg(c, mode);
}

model::ModelSpec logistic(std::size_t dim, std::size_t classes) {
  model::ModelSpec s;
  s.input_dim = dim;
  s.class_count = classes;
  return s;
}

}  // namespace

TEST_SUITE("parameter vector") {
  TEST_CASE("layout must be contiguous and cover the values") {
    CHECK_NOTHROW(ParameterVector({{"a", 0, 2}, {"b", 2, 1}}, {1, 2, 3}));
    CHECK_THROWS_AS(ParameterVector({{"a", 0, 2}, {"b", 3, 1}}, {1, 2, 3, 4}), PreconditionError);
    CHECK_THROWS_AS(ParameterVector({{"a", 1, 2}}, {1, 2}), PreconditionError);
    CHECK_THROWS_AS(ParameterVector({{"a", 0, 2}}, {1, 2, 3}), PreconditionError);
  }

  TEST_CASE("segments are views into the values") {
    ParameterVector p({{"a", 0, 2}, {"b", 2, 1}}, {1, 2, 3});
    CHECK(p.segment("b")[0] == 3);
    p.segment("a")[1] = 7;
    CHECK(p.values()[1] == 7);
    CHECK_THROWS_AS(p.segment("c"), PreconditionError);
  }

  TEST_CASE("bit identity distinguishes signed zeros") {
    const auto a = vec({0.0});
    const auto b = vec({-0.0});
    CHECK(a == b);
    CHECK_FALSE(a.bit_identical(b));
  }
}

TEST_SUITE("model spec") {
  TEST_CASE("parameter count is a pure function of the shape") {
    auto s = logistic(3, 4);
    CHECK(s.parameter_count() == 3 * 4 + 4);
    s.kind = model::ModelKind::kMlp;
    s.hidden_dims = {5, 2};
    CHECK(s.parameter_count() == (3 * 5 + 5) + (5 * 2 + 2) + (2 * 4 + 4));
    s.padding = 10;
    CHECK(s.active_parameter_count() == 44);
    CHECK(s.parameter_count() == 54);
  }

  TEST_CASE("fresh vector has exactly parameter_count values in the documented range") {
    testing::Gen g(11);
    for (int t = 0; t < 50; ++t) {
      model::ModelSpec s;
      s.kind = g.coin() ? model::ModelKind::kLogisticRegression : model::ModelKind::kMlp;
      s.input_dim = g.size(1, 6);
      if (s.kind == model::ModelKind::kMlp) s.hidden_dims = {g.size(1, 6)};
      s.class_count = g.size(2, 5);
      s.padding = g.size(0, 20);
      const auto p = s.initialize(g.bits());
      REQUIRE(p.size() == s.parameter_count());
      CHECK(p.layout() == s.layout());
      for (double v : p.values()) CHECK((v >= -0.05 && v < 0.05));
    }
  }

  TEST_CASE("initialization is seeded") {
    const auto s = logistic(4, 3);
    CHECK(s.initialize(5).bit_identical(s.initialize(5)));
    CHECK_FALSE(s.initialize(5).bit_identical(s.initialize(6)));
  }

  TEST_CASE("invalid shapes are reported") {
    auto s = logistic(0, 1);
    CHECK(s.problems().size() >= 2);
    CHECK_THROWS_AS(s.validate(), ConfigError);
    auto m = logistic(2, 2);
    m.kind = model::ModelKind::kMlp;
    CHECK_FALSE(m.problems().empty());  // mlp without hidden layers
  }
}

TEST_SUITE("fedavg") {
  TEST_CASE("single client is the identity") {
    const auto out = run_fedavg({vec({2.0, 4.0})}, {600}, AggregationMode::kUnweighted);
    CHECK(out.bit_identical(vec({2.0, 4.0})));
  }

  TEST_CASE("symmetric mean") {
    const auto out = run_fedavg({vec({1.0, 3.0}), vec({3.0, 5.0})}, {1, 1}, AggregationMode::kUnweighted);
    CHECK(out == vec({2.0, 4.0}));
  }

  TEST_CASE("weighted by sample count over three clients") {
    // (0*600 + 1*900 + 4*1300) / 2800 = 6100 / 2800
    const auto out = run_fedavg({vec({0.0, 0.0}), vec({1.0, 1.0}), vec({4.0, 4.0})}, {600, 900, 1300},
                                AggregationMode::kSampleWeighted);
    const double expected = 6100.0 / 2800.0;
    CHECK(expected == 2.1785714285714284);
    for (double v : out.values()) CHECK(v == doctest::Approx(expected).epsilon(1e-15));
  }

  TEST_CASE("empty list and zero counts are precondition violations") {
    std::vector<Contribution> none;
    CHECK_THROWS_AS(model::fedavg(none, AggregationMode::kUnweighted), PreconditionError);
    const auto a = vec({1.0});
    std::vector<Contribution> zero{{&a, 0}};
    CHECK_THROWS_AS(model::fedavg(zero, AggregationMode::kSampleWeighted), PreconditionError);
  }

  TEST_CASE("layout mismatch names the offending client") {
    const auto a = vec({1.0, 2.0});
    const auto b = vec({1.0, 2.0});
    const ParameterVector c({{"x", 0, 2}}, {1.0, 2.0});
    std::vector<Contribution> list{{&a, 1}, {&b, 1}, {&c, 1}};
    try {
      model::fedavg(list, AggregationMode::kUnweighted);
      FAIL("expected AggregationError");
    } catch (const AggregationError& e) {
      CHECK(e.client_index() == 2);
    }
  }

  TEST_CASE("properties over random inputs") {
    testing::Gen g(2024);
    for (int t = 0; t < 200; ++t) {
      const std::size_t k = g.size(1, 7);
      const std::size_t n = g.size(1, 200);
      std::vector<ParameterVector> vs;
      std::vector<std::vector<double>> raw;
      std::vector<std::uint64_t> counts;
      for (std::size_t i = 0; i < k; ++i) {
        raw.push_back(g.vector(n, g.real(0.1, 1000.0)));
        vs.push_back(vec(raw.back()));
        counts.push_back(g.size(1, 5000));
      }
      for (auto mode : {AggregationMode::kUnweighted, AggregationMode::kSampleWeighted}) {
        const bool weighted = mode == AggregationMode::kSampleWeighted;
        const auto out = run_fedavg(vs, counts, mode);
        const auto oracle = testing::oracle_mean(raw, counts, weighted);
        // permutation invariance, exactly
        std::vector<std::size_t> order(k);
        for (std::size_t i = 0; i < k; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), g.engine());
        std::vector<ParameterVector> pv;
        std::vector<std::uint64_t> pc;
        for (auto i : order) {
          pv.push_back(vs[i]);
          pc.push_back(counts[i]);
        }
        CHECK(run_fedavg(pv, pc, mode).bit_identical(out));
        for (std::size_t j = 0; j < n; ++j) {
          double lo = raw[0][j], hi = raw[0][j], scale = 0;
          for (const auto& r : raw) {
            lo = std::min(lo, r[j]);
            hi = std::max(hi, r[j]);
            scale = std::max(scale, std::abs(r[j]));
          }
          CHECK(out.values()[j] >= lo);
          CHECK(out.values()[j] <= hi);
          CHECK(std::abs(out.values()[j] - oracle[j]) <= 1e-13 * std::max(1.0, scale));
        }
      }
      // k copies of one vector return it exactly, under any weights
      std::vector<ParameterVector> copies(k, vs[0]);
      CHECK(run_fedavg(copies, counts, AggregationMode::kUnweighted).bit_identical(vs[0]));
      CHECK(run_fedavg(copies, counts, AggregationMode::kSampleWeighted).bit_identical(vs[0]));
      // equal counts: weighted == unweighted within 1e-12
      std::vector<std::uint64_t> same(k, counts[0]);
      const auto u = run_fedavg(vs, same, AggregationMode::kUnweighted);
      const auto w = run_fedavg(vs, same, AggregationMode::kSampleWeighted);
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(std::abs(u.values()[j] - w.values()[j]) <= 1e-12 * std::max(1.0, std::abs(u.values()[j])));
      }
    }
  }

  TEST_CASE("non-finite input is rejected") {
    const auto a = vec({1.0});
    const auto b = vec({std::nan("")});
    std::vector<Contribution> list{{&a, 1}, {&b, 1}};
    CHECK_THROWS_AS(model::fedavg(list, AggregationMode::kUnweighted), AggregationError);
  }
}

TEST_SUITE("evaluate") {
  TEST_CASE("zero-weight logistic model on balanced two-class data scores one half") {
    const auto spec = logistic(3, 2);
    const auto zero = ParameterVector::zeros(spec.layout());
    testing::Gen g(3);
    const auto data = testing::random_dataset(g, 100, 3, 2);
    CHECK(model::evaluate(zero, spec, data) == 0.5);
  }

  TEST_CASE("a model that scores the true class highest gets 1.0 on one sample") {
    const auto spec = logistic(1, 3);
    auto p = ParameterVector::zeros(spec.layout());
    p.segment("layer0.bias")[2] = 1.0;
    model::Dataset d(1, 3);
    const double x[] = {0.3};
    d.push_back(x, 2);
    CHECK(model::evaluate(p, spec, d) == 1.0);
  }

  TEST_CASE("ties go to the lowest class index") {
    const double scores[] = {1.0, 3.0, 3.0, 2.0};
    CHECK(model::argmax(scores) == 1);
  }

  TEST_CASE("dimension and layout mismatches are evaluation errors") {
    const auto spec = logistic(2, 2);
    const auto p = ParameterVector::zeros(spec.layout());
    model::Dataset wrong_dim(3, 2);
    const double x[] = {1, 2, 3};
    wrong_dim.push_back(x, 0);
    CHECK_THROWS_AS(model::evaluate(p, spec, wrong_dim), EvaluationError);
    model::Dataset ok(2, 2);
    ok.push_back(std::span<const double>(x, 2), 1);
    CHECK_THROWS_AS(model::evaluate(vec({1.0}), spec, ok), EvaluationError);
    CHECK_THROWS_AS(model::evaluate(p, spec, model::Dataset(2, 2)), EvaluationError);
  }

  TEST_CASE("forward pass matches the naive oracle") {
    testing::Gen g(8);
    for (int t = 0; t < 30; ++t) {
      model::ModelSpec s;
      s.kind = model::ModelKind::kMlp;
      s.input_dim = g.size(1, 4);
      s.hidden_dims = {g.size(1, 4), g.size(1, 3)};
      s.class_count = g.size(2, 4);
      auto p = s.initialize(g.bits());
      for (auto& v : p.values()) v = g.normal();
      const auto x = g.vector(s.input_dim);
      model::ForwardWorkspace ws;
      std::vector<double> z(s.class_count);
      model::forward(s, p.values(), x, ws, z);
      const auto oracle = testing::oracle_logits(s, p.values(), x);
      for (std::size_t c = 0; c < z.size(); ++c) CHECK(z[c] == doctest::Approx(oracle[c]).epsilon(1e-12));
    }
  }

  TEST_CASE("accuracy does not depend on sample order") {
    testing::Gen g(9);
    const auto spec = logistic(2, 3);
    auto p = spec.initialize(1);
    for (auto& v : p.values()) v = g.normal();
    const auto data = testing::random_dataset(g, 90, 2, 3);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), g.engine());
    CHECK(model::evaluate(p, spec, data) == model::evaluate(p, spec, data.subset(order)));
  }
}

TEST_SUITE("parameter encoding") {
  TEST_CASE("empty layout encodes to the header alone and round-trips") {
    const ParameterVector empty;
    const auto bytes = model::serialize_params(empty);
    CHECK(bytes.size() == model::kParamHeaderSize);
    const auto back = model::deserialize_params(bytes);
    CHECK(back.empty());
    CHECK(back.layout().empty());
  }

  TEST_CASE("random vectors of 10,000 values round-trip bit-exactly") {
    testing::Gen g(10);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> values(10'000);
      for (auto& v : values) v = g.wild_double();
      auto layout = g.layout(values.size());
      const ParameterVector p(std::move(layout), std::move(values));
      const auto bytes = model::serialize_params(p);
      CHECK(bytes.size() == model::encoded_size(p.layout()));
      CHECK(model::deserialize_params(bytes).bit_identical(p));
    }
  }

  TEST_CASE("size arithmetic for a 1,310,720-value vector") {
    const model::Layout layout{{"padding", 0, 1'310'720}};
    const std::size_t table = 2 + std::strlen("padding") + 16;
    CHECK(model::encoded_size(layout) == 10'485'760 + model::kParamHeaderSize + table);
    // at 10 MB/s the values alone take one second; the header adds one ms
    CHECK(net::transfer_time_ms(10'485'760, 10'485'760) == 1000);
    CHECK(net::transfer_time_ms(model::encoded_size(layout), 10'485'760) == 1001);
  }

  TEST_CASE("decode errors carry kind and offset") {
    const auto good = model::serialize_params(vec({1.0, 2.0}));
    auto expect = [](std::vector<std::uint8_t> bytes, DecodeErrorKind kind, std::size_t offset) {
      try {
        model::deserialize_params(bytes);
        FAIL("expected DecodeError");
      } catch (const DecodeError& e) {
        CHECK(e.kind() == kind);
        CHECK(e.offset() == offset);
      }
    };
    auto bad_magic = good;
    bad_magic[0] = 'X';
    expect(bad_magic, DecodeErrorKind::kBadMagic, 0);
    auto bad_version = good;
    bad_version[7] = 9;
    expect(bad_version, DecodeErrorKind::kUnsupportedVersion, 4);
    expect(std::vector<std::uint8_t>(good.begin(), good.end() - 1), DecodeErrorKind::kTruncated, good.size() - 8);
    auto trailing = good;
    trailing.push_back(0);
    expect(trailing, DecodeErrorKind::kTrailingBytes, good.size());
    auto inf = good;
    const std::size_t last = good.size() - 8;
    inf[last] = 0x7f;
    inf[last + 1] = 0xf0;
    for (int k = 2; k < 8; ++k) inf[last + k] = 0;
    expect(inf, DecodeErrorKind::kNonFinite, last);
  }

  TEST_CASE("non-finite values cannot be decoded from random corruptions") {
    testing::Gen g(12);
    const auto good = model::serialize_params(vec(g.vector(16)));
    int rejected = 0;
    for (int t = 0; t < 500; ++t) {
      auto bytes = good;
      bytes[g.size(0, bytes.size() - 1)] ^= static_cast<std::uint8_t>(1u << g.size(0, 7));
      try {
        const auto p = model::deserialize_params(bytes);
        CHECK(p.all_finite());
      } catch (const DecodeError&) {
        ++rejected;
      }
    }
    CHECK(rejected > 0);
  }
}
