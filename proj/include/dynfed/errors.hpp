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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dynfed {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated caller contract (empty input, mismatched sizes handed in by code).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class AggregationError : public Error {
 public:
  AggregationError(const std::string& what, std::size_t client_index)
      : Error(what), client_index_(client_index) {}
  std::size_t client_index() const { return client_index_; }

 private:
  std::size_t client_index_;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

enum class DecodeErrorKind {
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kBadLayout,
  kNonFinite,
  kTrailingBytes,
  kIncompleteFrame,
  kFrameTooLarge,
  kMalformedPayload,
};

std::string_view to_string(DecodeErrorKind kind);

// Raised by every binary/frame decoder. offset is the byte position at which
// decoding could not continue.
class DecodeError : public Error {
 public:
  DecodeError(DecodeErrorKind kind, std::size_t offset, const std::string& detail);
  DecodeErrorKind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

 private:
  DecodeErrorKind kind_;
  std::size_t offset_;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class ComparisonError : public Error {
 public:
  using Error::Error;
};

// Collects every problem found while validating a configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

}  // namespace dynfed
