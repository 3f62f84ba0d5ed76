// Copyright 2026 The docground Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Shared transport for the OCR, embedding, QA and planner services.
//
// Every service speaks one envelope: request {"kind": ..., "payload": {...}}
// and response {"kind": ..., "payload": {...}}. The per-kind payload schemas
// live next to the typed clients (ocr.hpp, retrieval.hpp, qa.hpp, planner.hpp).

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace docground {

using Json = nlohmann::json;
using Millis = std::chrono::milliseconds;

struct RetryPolicy {
  int retries = 2;
  Millis base_backoff{200};
  Millis max_backoff{5000};
  // Fixed seed gives a reproducible backoff schedule; otherwise jittered.
  std::optional<std::uint64_t> seed;
};

// Delay before retry i, for i in [0, retries).
std::vector<Millis> backoff_schedule(const RetryPolicy& policy);

struct ClientConfig {
  std::string endpoint;
  Millis timeout{30000};
  RetryPolicy retry;
  std::optional<std::string> bearer_token;
};

struct ClientStats {
  std::uint64_t calls = 0;
  std::uint64_t retries = 0;
  std::uint64_t failures = 0;
  std::chrono::microseconds total_latency{0};
};

class StatsCounter {
 public:
  void add_call() { calls_.fetch_add(1, std::memory_order_relaxed); }
  void add_retry() { retries_.fetch_add(1, std::memory_order_relaxed); }
  void add_failure() { failures_.fetch_add(1, std::memory_order_relaxed); }
  void add_latency(std::chrono::microseconds d) {
    latency_us_.fetch_add(static_cast<std::uint64_t>(d.count()), std::memory_order_relaxed);
  }
  ClientStats snapshot() const;

 private:
  std::atomic<std::uint64_t> calls_{0};
  std::atomic<std::uint64_t> retries_{0};
  std::atomic<std::uint64_t> failures_{0};
  std::atomic<std::uint64_t> latency_us_{0};
};

// One request/response exchange. Throws RetryableError for transient failures,
// ServiceError for permanent ones and ParseError for malformed bodies.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Json send(const Json& request) = 0;
};

// JSON POST to an http:// endpoint.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(ClientConfig config);
  Json send(const Json& request) override;

 private:
  ClientConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

// In-process transport backed by a callable; used for mocks and tests.
class FunctionTransport final : public Transport {
 public:
  explicit FunctionTransport(std::function<Json(const Json&)> fn) : fn_(std::move(fn)) {}
  Json send(const Json& request) override { return fn_(request); }

 private:
  std::function<Json(const Json&)> fn_;
};

using Sleeper = std::function<void(Millis)>;
Sleeper real_sleeper();

// At most 1 + policy.retries attempts. Only RetryableError triggers a retry;
// when attempts run out the last RetryableError is rethrown.
Json call_with_retry(Transport& transport, const Json& request, const RetryPolicy& policy,
                     StatsCounter& stats, const Sleeper& sleep);

class ServiceClient {
 public:
  virtual ~ServiceClient() = default;
  virtual Json call(const Json& request) = 0;
  // Counters for calls that reached the external transport.
  virtual ClientStats stats() const = 0;
};

class RetryingClient final : public ServiceClient {
 public:
  RetryingClient(std::shared_ptr<Transport> transport, RetryPolicy policy,
                 Sleeper sleep = real_sleeper());
  Json call(const Json& request) override;
  ClientStats stats() const override { return stats_.snapshot(); }

 private:
  std::shared_ptr<Transport> transport_;
  RetryPolicy policy_;
  Sleeper sleep_;
  StatsCounter stats_;
};

Json make_envelope(std::string_view kind, Json payload);
// Validates the envelope and returns its payload; ParseError otherwise.
const Json& envelope_payload(const Json& response, std::string_view kind);

// SHA-256 (hex) of the canonical serialization: sorted keys, no whitespace.
std::string canonical_request_hash(const Json& request);

struct RecordedExchange {
  std::string request_hash;
  Json request;
  Json response;
  std::string timestamp;
};

// Directory of <request_hash>.json files.
class ReplayStore {
 public:
  explicit ReplayStore(std::filesystem::path dir);
  std::optional<RecordedExchange> find(const std::string& request_hash) const;
  void save(const RecordedExchange& exchange);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::string, RecordedExchange> cache_;
};

enum class ReplayMode { Record, Replay, Passthrough };

ReplayMode replay_mode_from_string(std::string_view name);

class RecordReplayClient final : public ServiceClient {
 public:
  // inner may be null only in Replay mode.
  RecordReplayClient(std::shared_ptr<ServiceClient> inner, ReplayMode mode,
                     std::shared_ptr<ReplayStore> store);
  Json call(const Json& request) override;
  ClientStats stats() const override;
  std::uint64_t replayed() const { return replayed_.load(); }

 private:
  std::shared_ptr<ServiceClient> inner_;
  ReplayMode mode_;
  std::shared_ptr<ReplayStore> store_;
  std::atomic<std::uint64_t> replayed_{0};
};

std::shared_ptr<ServiceClient> record_replay_wrapper(std::shared_ptr<ServiceClient> inner,
                                                     ReplayMode mode,
                                                     const std::filesystem::path& store_dir);

}  // namespace docground
