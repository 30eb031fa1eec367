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

#include "test_support.hpp"

#include "dynfed/model/serialize.hpp"

namespace dynfed::testing {

namespace {

model::ParameterVector random_params(Gen& g, std::size_t max_values) {
  const std::size_t n = g.size(0, max_values);
  std::vector<double> values(n);
  for (auto& v : values) v = g.wild_double();
  return model::ParameterVector(g.layout(n), std::move(values));
}

}  // namespace

protocol::Message random_message(Gen& g, std::size_t which) {
  using namespace protocol;
  const std::string id = g.text(12);
  const int round = g.integer(0, 1000);
  const double acc = g.real(0.0, 1.0);
  Message m;
  m.job_id = g.text(10);
  switch (which % kMessageVariants) {
    case 0: m.body = RegisterClient{id}; break;
    case 1: m.body = JobDownloadRequest{id}; break;
    case 2: {
      TrainingJob job;
      job.job_id = m.job_id;
      job.fusion_times = g.integer(1, 100);
      job.model_spec.kind = g.coin() ? model::ModelKind::kLogisticRegression : model::ModelKind::kMlp;
      job.model_spec.input_dim = g.size(1, 5);
      if (job.model_spec.kind == model::ModelKind::kMlp) job.model_spec.hidden_dims = {g.size(1, 4)};
      job.model_spec.class_count = g.size(2, 4);
      job.model_spec.padding = g.size(0, 3);
      job.initial_model = job.model_spec.initialize(g.bits());
      job.hyperparameters = {g.real(1e-4, 1.0), g.size(1, 64), g.integer(1, 100)};
      job.initial_waiting_time_ms = g.integer(1, 100000);
      job.mode = g.coin() ? JobMode::kDefault : JobMode::kDynamicFusion;
      job.participation = g.coin() ? ParticipationPolicy::kGlobalMax : ParticipationPolicy::kLocalPrevious;
      job.dispatch = g.coin() ? DispatchPolicy::kAll : DispatchPolicy::kParticipantsOnly;
      job.validation_ref = g.text(20);
      m.body = JobPayload{job};
      break;
    }
    case 3: m.body = TrainingTimeReport{id, round, g.integer(1, 1 << 30)}; break;
    case 4: m.body = MaxAccRequest{id, round}; break;
    case 5: m.body = MaxAccReply{round, acc}; break;
    case 6: m.body = UploadRequest{id, round, acc}; break;
    case 7: m.body = UploadAccept{round}; break;
    case 8: m.body = UploadReject{round, g.text(30)}; break;
    case 9:
      m.body = ModelUpload{id, round, model::serialize_params(random_params(g, 300)), g.size(1, 100000), acc,
                           g.integer(1, 1 << 30)};
      break;
    case 10: m.body = GlobalModelDispatch{round, model::serialize_params(random_params(g, 300)), acc}; break;
    default: m.body = JobComplete{round}; break;
  }
  return m;
}

}  // namespace dynfed::testing
