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

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynfed/protocol/messages.hpp"

namespace dynfed::protocol {

inline constexpr std::size_t kDefaultMaxFrameSize = std::size_t{256} << 20;

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws DecodeError(kMalformedPayload) on invalid input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Compact JSON object with a "type" field; keys are emitted in sorted order.
std::string encode_payload(const Message& msg);
Message decode_payload(std::string_view payload);

/// 4-byte big-endian payload length followed by the UTF-8 payload.
std::vector<std::uint8_t> frame_encode(const Message& msg);

/// Decodes exactly one frame. Throws DecodeError: kIncompleteFrame when the
/// buffer ends early, kFrameTooLarge when the length prefix exceeds
/// `max_frame_size`, kMalformedPayload for bad JSON or fields, and
/// kTrailingBytes when data follows the frame.
Message frame_decode(std::span<const std::uint8_t> bytes, std::size_t max_frame_size = kDefaultMaxFrameSize);

// Incremental reassembly of frames from a byte stream.
class FrameDecoder {
 public:
  explicit FrameDecoder(std::size_t max_frame_size = kDefaultMaxFrameSize) : max_frame_size_(max_frame_size) {}

  void feed(std::span<const std::uint8_t> bytes);
  // Next complete payload, if one is buffered. Throws kFrameTooLarge.
  std::optional<std::string> next_payload();
  std::optional<Message> next();
  std::size_t buffered() const { return buffer_.size() - consumed_; }

 private:
  std::size_t max_frame_size_;
  std::vector<std::uint8_t> buffer_;
  std::size_t consumed_ = 0;
};

}  // namespace dynfed::protocol
