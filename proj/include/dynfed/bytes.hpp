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

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynfed/errors.hpp"

namespace dynfed {

// Big-endian append-only writer.
class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename UInt>
  void put_uint(UInt value) {
    for (int shift = (sizeof(UInt) - 1) * 8; shift >= 0; shift -= 8) {
      out_.push_back(static_cast<std::uint8_t>(value >> shift));
    }
  }
  void put_f64(double value) { put_uint(std::bit_cast<std::uint64_t>(value)); }
  void put_bytes(std::string_view bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }

 private:
  std::vector<std::uint8_t>& out_;
};

// Big-endian cursor; every read past the end raises kTruncated at the offset
// where the missing field starts.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  template <typename UInt>
  UInt get_uint(const char* what) {
    require(sizeof(UInt), what);
    UInt value = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) value = static_cast<UInt>((value << 8) | bytes_[pos_ + i]);
    pos_ += sizeof(UInt);
    return value;
  }
  double get_f64(const char* what) { return std::bit_cast<double>(get_uint<std::uint64_t>(what)); }
  std::string get_string(std::size_t length, const char* what) {
    require(length, what);
    std::string text(reinterpret_cast<const char*>(bytes_.data() + pos_), length);
    pos_ += length;
    return text;
  }

 private:
  void require(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw DecodeError(DecodeErrorKind::kTruncated, pos_, std::string("missing ") + what);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace dynfed
