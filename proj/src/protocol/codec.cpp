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

#include "dynfed/protocol/codec.hpp"

#include <array>
#include <json.hpp>

#include "dynfed/errors.hpp"
#include "dynfed/model/serialize.hpp"

namespace dynfed::protocol {

using json = nlohmann::json;

namespace {

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

[[noreturn]] void malformed(const std::string& detail, std::size_t offset = 0) {
  throw DecodeError(DecodeErrorKind::kMalformedPayload, offset, detail);
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  static const auto table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    for (std::size_t k = 0; k < kAlphabet.size(); ++k) t[static_cast<unsigned char>(kAlphabet[k])] = static_cast<int>(k);
    return t;
  }();
  if (text.size() % 4 != 0) malformed("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t v = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && last && k >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      const int d = table[static_cast<unsigned char>(c)];
      if (d < 0 || pad > 0) malformed("invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

namespace {

json spec_to_json(const model::ModelSpec& spec) {
  return {{"kind", std::string(model::to_string(spec.kind))},
          {"input_dim", spec.input_dim},
          {"hidden_dims", spec.hidden_dims},
          {"class_count", spec.class_count},
          {"padding", spec.padding}};
}

model::ModelSpec spec_from_json(const json& j) {
  model::ModelSpec spec;
  try {
    spec.kind = model::parse_model_kind(j.at("kind").get<std::string>());
  } catch (const ConfigError& e) {
    malformed(e.problems().front());
  }
  spec.input_dim = j.at("input_dim").get<std::size_t>();
  spec.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  spec.class_count = j.at("class_count").get<std::size_t>();
  spec.padding = j.at("padding").get<std::size_t>();
  return spec;
}

json params_to_json(std::span<const std::uint8_t> bytes) { return base64_encode(bytes); }

std::vector<std::uint8_t> params_from_json(const json& j) { return base64_decode(j.get_ref<const std::string&>()); }

int round_from(const json& j) {
  const auto& r = j.at("round");
  if (!r.is_number_integer() || r.get<std::int64_t>() < 0 || r.get<std::int64_t>() > 1'000'000'000) {
    malformed("round must be a non-negative integer");
  }
  return r.get<int>();
}

std::string string_from(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) malformed(std::string(key) + " must be a string");
  return v.get<std::string>();
}

double fraction_from(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) malformed(std::string(key) + " must be a number");
  return v.get<double>();
}

std::int64_t integer_from(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) malformed(std::string(key) + " must be an integer");
  return v.get<std::int64_t>();
}

json job_to_json(const TrainingJob& job) {
  return {{"job_id", job.job_id},
          {"fusion_times", job.fusion_times},
          {"model_spec", spec_to_json(job.model_spec)},
          {"initial_model", base64_encode(model::serialize_params(job.initial_model))},
          {"hyperparameters",
           {{"lr", job.hyperparameters.lr},
            {"batch_size", job.hyperparameters.batch_size},
            {"epochs", job.hyperparameters.epochs}}},
          {"initial_waiting_time_ms", job.initial_waiting_time_ms},
          {"mode", std::string(to_string(job.mode))},
          {"participation", std::string(to_string(job.participation))},
          {"dispatch", std::string(to_string(job.dispatch))},
          {"validation_ref", job.validation_ref}};
}

TrainingJob job_from_json(const json& j) {
  TrainingJob job;
  job.job_id = string_from(j, "job_id");
  job.fusion_times = static_cast<int>(integer_from(j, "fusion_times"));
  job.model_spec = spec_from_json(j.at("model_spec"));
  job.initial_model = model::deserialize_params(base64_decode(string_from(j, "initial_model")));
  const auto& hp = j.at("hyperparameters");
  job.hyperparameters.lr = fraction_from(hp, "lr");
  job.hyperparameters.batch_size = static_cast<std::size_t>(integer_from(hp, "batch_size"));
  job.hyperparameters.epochs = static_cast<int>(integer_from(hp, "epochs"));
  job.initial_waiting_time_ms = integer_from(j, "initial_waiting_time_ms");
  try {
    job.mode = parse_job_mode(string_from(j, "mode"));
    job.participation = parse_participation_policy(string_from(j, "participation"));
    job.dispatch = parse_dispatch_policy(string_from(j, "dispatch"));
  } catch (const ConfigError& e) {
    malformed(e.problems().front());
  }
  job.validation_ref = string_from(j, "validation_ref");
  return job;
}

struct ToJson {
  json& j;
  void operator()(const RegisterClient& m) const { j["client_id"] = m.client_id; }
  void operator()(const JobDownloadRequest& m) const { j["client_id"] = m.client_id; }
  void operator()(const JobPayload& m) const { j["job"] = job_to_json(m.job); }
  void operator()(const TrainingTimeReport& m) const {
    j["client_id"] = m.client_id;
    j["round"] = m.round;
    j["training_time_ms"] = m.training_time_ms;
  }
  void operator()(const MaxAccRequest& m) const {
    j["client_id"] = m.client_id;
    j["round"] = m.round;
  }
  void operator()(const MaxAccReply& m) const {
    j["round"] = m.round;
    j["max_acc"] = m.max_acc;
  }
  void operator()(const UploadRequest& m) const {
    j["client_id"] = m.client_id;
    j["round"] = m.round;
    j["local_acc"] = m.local_acc;
  }
  void operator()(const UploadAccept& m) const { j["round"] = m.round; }
  void operator()(const UploadReject& m) const {
    j["round"] = m.round;
    j["reason"] = m.reason;
  }
  void operator()(const ModelUpload& m) const {
    j["client_id"] = m.client_id;
    j["round"] = m.round;
    j["params"] = params_to_json(m.params);
    j["sample_count"] = m.sample_count;
    j["local_acc"] = m.local_acc;
    j["training_time_ms"] = m.training_time_ms;
  }
  void operator()(const GlobalModelDispatch& m) const {
    j["round"] = m.round;
    j["params"] = params_to_json(m.params);
    j["max_acc"] = m.max_acc;
  }
  void operator()(const JobComplete& m) const { j["round"] = m.round; }
};

Body body_from_json(const std::string& type, const json& j) {
  if (type == "register_client") return RegisterClient{string_from(j, "client_id")};
  if (type == "job_download_request") return JobDownloadRequest{string_from(j, "client_id")};
  if (type == "job_payload") return JobPayload{job_from_json(j.at("job"))};
  if (type == "training_time_report") {
    return TrainingTimeReport{string_from(j, "client_id"), round_from(j), integer_from(j, "training_time_ms")};
  }
  if (type == "max_acc_request") return MaxAccRequest{string_from(j, "client_id"), round_from(j)};
  if (type == "max_acc_reply") return MaxAccReply{round_from(j), fraction_from(j, "max_acc")};
  if (type == "upload_request") {
    return UploadRequest{string_from(j, "client_id"), round_from(j), fraction_from(j, "local_acc")};
  }
  if (type == "upload_accept") return UploadAccept{round_from(j)};
  if (type == "upload_reject") return UploadReject{round_from(j), string_from(j, "reason")};
  if (type == "model_upload") {
    const auto samples = integer_from(j, "sample_count");
    if (samples < 0) malformed("sample_count must be non-negative");
    return ModelUpload{string_from(j, "client_id"),     round_from(j),
                       params_from_json(j.at("params")), static_cast<std::uint64_t>(samples),
                       fraction_from(j, "local_acc"),    integer_from(j, "training_time_ms")};
  }
  if (type == "global_model_dispatch") {
    return GlobalModelDispatch{round_from(j), params_from_json(j.at("params")), fraction_from(j, "max_acc")};
  }
  if (type == "job_complete") return JobComplete{round_from(j)};
  malformed("unknown message type '" + type + "'");
}

}  // namespace

std::string encode_payload(const Message& msg) {
  json j = json::object();
  j["type"] = std::string(type_name(msg.body));
  j["job_id"] = msg.job_id;
  std::visit(ToJson{j}, msg.body);
  return j.dump();
}

Message decode_payload(std::string_view payload) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::parse_error& e) {
    malformed(e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
  if (!j.is_object()) malformed("payload is not an object");
  try {
    Message msg;
    msg.job_id = string_from(j, "job_id");
    msg.body = body_from_json(string_from(j, "type"), j);
    return msg;
  } catch (const json::exception& e) {
    malformed(e.what());
  } catch (const DecodeError& e) {
    // A bad embedded initial model makes the payload malformed; offsets
    // inside base64 text mean nothing at payload level.
    if (e.kind() == DecodeErrorKind::kMalformedPayload) throw;
    malformed(std::string("embedded parameters: ") + e.what());
  }
}

std::vector<std::uint8_t> frame_encode(const Message& msg) {
  const std::string payload = encode_payload(msg);
  if (payload.size() > 0xFFFFFFFFu) throw PreconditionError("message too large for a frame");
  std::vector<std::uint8_t> frame(4 + payload.size());
  const auto n = static_cast<std::uint32_t>(payload.size());
  frame[0] = static_cast<std::uint8_t>(n >> 24);
  frame[1] = static_cast<std::uint8_t>(n >> 16);
  frame[2] = static_cast<std::uint8_t>(n >> 8);
  frame[3] = static_cast<std::uint8_t>(n);
  std::copy(payload.begin(), payload.end(), frame.begin() + 4);
  return frame;
}

namespace {

std::uint32_t read_length(std::span<const std::uint8_t> bytes) {
  return (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) | (std::uint32_t{bytes[2]} << 8) |
         std::uint32_t{bytes[3]};
}

}  // namespace

Message frame_decode(std::span<const std::uint8_t> bytes, std::size_t max_frame_size) {
  if (bytes.size() < 4) {
    throw DecodeError(DecodeErrorKind::kIncompleteFrame, bytes.size(), "length prefix needs 4 bytes");
  }
  const std::uint32_t length = read_length(bytes);
  if (length > max_frame_size) {
    throw DecodeError(DecodeErrorKind::kFrameTooLarge, 0,
                      "payload length " + std::to_string(length) + " exceeds " + std::to_string(max_frame_size));
  }
  if (bytes.size() - 4 < length) {
    throw DecodeError(DecodeErrorKind::kIncompleteFrame, bytes.size(),
                      "frame announces " + std::to_string(length) + " payload bytes");
  }
  if (bytes.size() - 4 > length) {
    throw DecodeError(DecodeErrorKind::kTrailingBytes, 4 + length, "data after the frame");
  }
  const std::string_view payload(reinterpret_cast<const char*>(bytes.data() + 4), length);
  try {
    return decode_payload(payload);
  } catch (const DecodeError& e) {
    throw DecodeError(e.kind(), e.offset() + 4, e.what());
  }
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (consumed_ > 0 && consumed_ == buffer_.size()) {
    buffer_.clear();
    consumed_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<std::string> FrameDecoder::next_payload() {
  const auto available = std::span<const std::uint8_t>(buffer_).subspan(consumed_);
  if (available.size() < 4) return std::nullopt;
  const std::uint32_t length = read_length(available);
  if (length > max_frame_size_) {
    throw DecodeError(DecodeErrorKind::kFrameTooLarge, consumed_, "payload length " + std::to_string(length));
  }
  if (available.size() - 4 < length) return std::nullopt;
  std::string payload(reinterpret_cast<const char*>(available.data() + 4), length);
  consumed_ += 4 + length;
  if (consumed_ > (1u << 20) && consumed_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(consumed_));
    consumed_ = 0;
  }
  return payload;
}

std::optional<Message> FrameDecoder::next() {
  auto payload = next_payload();
  if (!payload) return std::nullopt;
  return decode_payload(*payload);
}

}  // namespace dynfed::protocol
