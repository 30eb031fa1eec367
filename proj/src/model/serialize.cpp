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

#include "dynfed/model/serialize.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dynfed/bytes.hpp"
#include "dynfed/errors.hpp"

namespace dynfed::model {

namespace {

constexpr std::string_view kMagic = "DFPV";

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) extra = 0;
    else if ((c & 0xE0) == 0xC0 && c >= 0xC2) extra = 1;
    else if ((c & 0xF0) == 0xE0) extra = 2;
    else if ((c & 0xF8) == 0xF0 && c <= 0xF4) extra = 3;
    else return false;
    if (i + extra >= s.size() && extra > 0) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += extra + 1;
  }
  return true;
}

}  // namespace

std::size_t encoded_size(const Layout& layout) {
  std::size_t size = kParamHeaderSize;
  for (const auto& s : layout) size += 2 + s.name.size() + 16;
  return size + 8 * layout_size(layout);
}

std::vector<std::uint8_t> serialize_params(const ParameterVector& model) {
  std::vector<std::uint8_t> out;
  out.reserve(encoded_size(model.layout()));
  ByteWriter w(out);
  w.put_bytes(kMagic);
  w.put_uint<std::uint32_t>(kParamFormatVersion);
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(model.layout().size()));
  for (const auto& s : model.layout()) {
    if (s.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw PreconditionError("segment name too long: " + s.name.substr(0, 32));
    }
    w.put_uint<std::uint16_t>(static_cast<std::uint16_t>(s.name.size()));
    w.put_bytes(s.name);
    w.put_uint<std::uint64_t>(s.offset);
    w.put_uint<std::uint64_t>(s.length);
  }
  for (double v : model.values()) w.put_f64(v);
  return out;
}

ParameterVector deserialize_params(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const std::string magic = r.get_string(4, "magic");
  if (magic != kMagic) throw DecodeError(DecodeErrorKind::kBadMagic, 0, "expected \"DFPV\"");
  const std::size_t version_at = r.offset();
  const auto version = r.get_uint<std::uint32_t>("format version");
  if (version != kParamFormatVersion) {
    throw DecodeError(DecodeErrorKind::kUnsupportedVersion, version_at, "version " + std::to_string(version));
  }
  const auto segments = r.get_uint<std::uint32_t>("segment count");

  Layout layout;
  std::uint64_t expected_offset = 0;
  for (std::uint32_t k = 0; k < segments; ++k) {
    const std::size_t entry_at = r.offset();
    const auto name_len = r.get_uint<std::uint16_t>("segment name length");
    std::string name = r.get_string(name_len, "segment name");
    if (!valid_utf8(name)) {
      throw DecodeError(DecodeErrorKind::kBadLayout, entry_at, "segment name is not UTF-8");
    }
    const auto offset = r.get_uint<std::uint64_t>("segment offset");
    const auto length = r.get_uint<std::uint64_t>("segment length");
    if (offset != expected_offset) {
      throw DecodeError(DecodeErrorKind::kBadLayout, entry_at,
                        "segment '" + name + "' is not contiguous with the previous one");
    }
    // Every value needs 8 bytes; reject lengths the buffer cannot possibly hold
    // before allocating anything.
    if (length > bytes.size() / 8 || expected_offset + length > bytes.size() / 8) {
      throw DecodeError(DecodeErrorKind::kTruncated, entry_at,
                        "segment '" + name + "' claims more values than the buffer holds");
    }
    expected_offset += length;
    layout.push_back({std::move(name), offset, length});
  }

  std::vector<double> values(expected_offset);
  for (auto& v : values) {
    const std::size_t at = r.offset();
    v = r.get_f64("parameter value");
    if (!std::isfinite(v)) throw DecodeError(DecodeErrorKind::kNonFinite, at, "non-finite parameter");
  }
  if (r.remaining() != 0) {
    throw DecodeError(DecodeErrorKind::kTrailingBytes, r.offset(),
                      std::to_string(r.remaining()) + " bytes after the last value");
  }
  return ParameterVector(std::move(layout), std::move(values));
}

}  // namespace dynfed::model
