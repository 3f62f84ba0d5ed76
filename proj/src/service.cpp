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

#include "docground/service.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include "docground/error.hpp"
#include "httplib.h"

namespace docground {

namespace fs = std::filesystem;

std::vector<Millis> backoff_schedule(const RetryPolicy& policy) {
  std::mt19937_64 rng(policy.seed ? *policy.seed : std::random_device{}());
  std::vector<Millis> out;
  for (int i = 0; i < policy.retries; ++i) {
    const double cap = static_cast<double>(policy.max_backoff.count());
    const double base = std::min(cap, static_cast<double>(policy.base_backoff.count()) *
                                          static_cast<double>(1ull << std::min(i, 30)));
    // Top 53 bits -> [0,1); avoids implementation-defined distributions.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    out.emplace_back(static_cast<Millis::rep>(base * (0.5 + 0.5 * u)));
  }
  return out;
}

ClientStats StatsCounter::snapshot() const {
  ClientStats s;
  s.calls = calls_.load();
  s.retries = retries_.load();
  s.failures = failures_.load();
  s.total_latency = std::chrono::microseconds(latency_us_.load());
  return s;
}

HttpTransport::HttpTransport(ClientConfig config) : config_(std::move(config)) {
  const std::string& ep = config_.endpoint;
  const auto scheme_end = ep.find("://");
  if (scheme_end == std::string::npos || ep.substr(0, scheme_end) != "http") {
    throw ConfigError("endpoint must be an http:// URI: '" + ep + "'");
  }
  const auto path_start = ep.find('/', scheme_end + 3);
  scheme_host_port_ = ep.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : ep.substr(path_start);
}

Json HttpTransport::send(const Json& request) {
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (config_.bearer_token) headers.emplace("Authorization", "Bearer " + *config_.bearer_token);

  auto res = client.Post(path_, headers, request.dump(), "application/json");
  if (!res) {
    throw RetryableError("transport failure to " + config_.endpoint + ": " +
                         httplib::to_string(res.error()));
  }
  if (res->status >= 500 || res->status == 429 || res->status == 408) {
    throw RetryableError("service " + config_.endpoint + " returned HTTP " +
                         std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ServiceError("service " + config_.endpoint + " returned HTTP " +
                       std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  try {
    return Json::parse(res->body);
  } catch (const Json::parse_error& e) {
    throw ParseError("malformed JSON from " + config_.endpoint + ": " + e.what() +
                     "; body: " + res->body.substr(0, 200));
  }
}

Sleeper real_sleeper() {
  return [](Millis d) { std::this_thread::sleep_for(d); };
}

Json call_with_retry(Transport& transport, const Json& request, const RetryPolicy& policy,
                     StatsCounter& stats, const Sleeper& sleep) {
  if (policy.retries < 0) throw ConfigError("retries must be >= 0");
  stats.add_call();
  const auto schedule = backoff_schedule(policy);
  const auto start = std::chrono::steady_clock::now();
  auto record_latency = [&] {
    stats.add_latency(std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - start));
  };
  for (int attempt = 0;; ++attempt) {
    try {
      Json response = transport.send(request);
      record_latency();
      return response;
    } catch (const RetryableError&) {
      if (attempt >= policy.retries) {
        stats.add_failure();
        record_latency();
        throw;
      }
      stats.add_retry();
      sleep(schedule[static_cast<std::size_t>(attempt)]);
    } catch (...) {
      stats.add_failure();
      record_latency();
      throw;
    }
  }
}

RetryingClient::RetryingClient(std::shared_ptr<Transport> transport, RetryPolicy policy,
                               Sleeper sleep)
    : transport_(std::move(transport)), policy_(policy), sleep_(std::move(sleep)) {
  if (!transport_) throw ConfigError("RetryingClient needs a transport");
  if (policy_.retries < 0) throw ConfigError("retries must be >= 0");
}

Json RetryingClient::call(const Json& request) {
  return call_with_retry(*transport_, request, policy_, stats_, sleep_);
}

Json make_envelope(std::string_view kind, Json payload) {
  return Json{{"kind", kind}, {"payload", std::move(payload)}};
}

const Json& envelope_payload(const Json& response, std::string_view kind) {
  if (!response.is_object() || !response.contains("kind") || !response.contains("payload")) {
    throw ParseError("response is not a {kind, payload} envelope: " + response.dump().substr(0, 200));
  }
  if (!response["kind"].is_string() || response["kind"].get<std::string>() != kind) {
    throw ParseError("response kind mismatch, expected '" + std::string(kind) +
                     "': " + response.dump().substr(0, 200));
  }
  return response["payload"];
}

std::string canonical_request_hash(const Json& request) {
  const std::string canonical = request.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

ReplayStore::ReplayStore(fs::path dir) : dir_(std::move(dir)) {}

std::optional<RecordedExchange> ReplayStore::find(const std::string& request_hash) const {
  {
    std::shared_lock lock(mutex_);
    if (auto it = cache_.find(request_hash); it != cache_.end()) return it->second;
  }
  const fs::path file = dir_ / (request_hash + ".json");
  std::ifstream in(file);
  if (!in) return std::nullopt;
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ParseError("corrupt replay file " + file.string() + ": " + e.what());
  }
  RecordedExchange ex{j.at("request_hash").get<std::string>(), j.at("request"), j.at("response"),
                      j.value("timestamp", std::string{})};
  std::unique_lock lock(mutex_);
  cache_.emplace(request_hash, ex);
  return ex;
}

void ReplayStore::save(const RecordedExchange& exchange) {
  std::unique_lock lock(mutex_);
  fs::create_directories(dir_);
  const fs::path file = dir_ / (exchange.request_hash + ".json");
  const fs::path tmp = dir_ / (exchange.request_hash + ".json.tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write replay file " + tmp.string());
    out << Json{{"request_hash", exchange.request_hash},
                {"request", exchange.request},
                {"response", exchange.response},
                {"timestamp", exchange.timestamp}}
               .dump(2)
        << '\n';
  }
  fs::rename(tmp, file);
  cache_[exchange.request_hash] = exchange;
}

ReplayMode replay_mode_from_string(std::string_view name) {
  if (name == "record") return ReplayMode::Record;
  if (name == "replay") return ReplayMode::Replay;
  if (name == "passthrough") return ReplayMode::Passthrough;
  throw ConfigError("unknown replay mode '" + std::string(name) + "'");
}

RecordReplayClient::RecordReplayClient(std::shared_ptr<ServiceClient> inner, ReplayMode mode,
                                       std::shared_ptr<ReplayStore> store)
    : inner_(std::move(inner)), mode_(mode), store_(std::move(store)) {
  if (!inner_ && mode_ != ReplayMode::Replay) {
    throw ConfigError("record/passthrough modes need an inner client");
  }
  if (!store_ && mode_ != ReplayMode::Passthrough) throw ConfigError("replay store required");
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

Json RecordReplayClient::call(const Json& request) {
  switch (mode_) {
    case ReplayMode::Passthrough:
      return inner_->call(request);
    case ReplayMode::Replay: {
      const std::string hash = canonical_request_hash(request);
      auto hit = store_->find(hash);
      if (!hit) throw ServiceError("replay miss for request hash " + hash);
      replayed_.fetch_add(1);
      return hit->response;
    }
    case ReplayMode::Record: {
      Json response = inner_->call(request);
      store_->save({canonical_request_hash(request), request, response, utc_timestamp()});
      return response;
    }
  }
  throw ConfigError("unreachable replay mode");
}

ClientStats RecordReplayClient::stats() const {
  return inner_ ? inner_->stats() : ClientStats{};
}

std::shared_ptr<ServiceClient> record_replay_wrapper(std::shared_ptr<ServiceClient> inner,
                                                     ReplayMode mode,
                                                     const fs::path& store_dir) {
  return std::make_shared<RecordReplayClient>(std::move(inner), mode,
                                              std::make_shared<ReplayStore>(store_dir));
}

}  // namespace docground
