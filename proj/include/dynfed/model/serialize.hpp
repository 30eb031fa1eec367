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
#include <span>
#include <vector>

#include "dynfed/model/parameter_vector.hpp"

namespace dynfed::model {

// DFPV binary format, all integers big-endian:
//   "DFPV" | version u32 | segment count u32
//   per segment: name length u16 | name (UTF-8) | offset u64 | length u64
//   values: IEEE-754 binary64, layout order
inline constexpr std::uint32_t kParamFormatVersion = 1;
inline constexpr std::size_t kParamHeaderSize = 12;

std::size_t encoded_size(const Layout& layout);

std::vector<std::uint8_t> serialize_params(const ParameterVector& model);

// Throws DecodeError carrying the failing byte offset.
ParameterVector deserialize_params(std::span<const std::uint8_t> bytes);

}  // namespace dynfed::model
