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

#include "dynfed/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace dynfed::log {

namespace {
std::atomic<Level> g_level{Level::kWarn};
std::mutex g_mutex;
constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void write(Level lvl, const std::string& message) {
  if (lvl < g_level.load() || lvl == Level::kOff) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "[dynfed " << kNames[static_cast<int>(lvl)] << "] " << message << '\n';
}

}  // namespace dynfed::log
