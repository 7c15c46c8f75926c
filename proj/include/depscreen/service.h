// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_SERVICE_H_
#define DEPSCREEN_SERVICE_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "depscreen/corpus.h"

namespace depscreen {

enum class Role { kUser, kClinician };

struct Principal {
  std::string id;
  Role role = Role::kUser;
};

struct ServiceConfig {
  std::string data_dir;
  // Seed artifacts, copied into data_dir on first start only.
  std::string bundle_path;
  std::string corpus_path;
  ClassBoundary boundary;
  std::map<std::string, Principal> tokens;  // bearer token -> principal
  std::string bind_host = "127.0.0.1";
  int port = 8080;
  // Receives one JSON line per handled request; null disables logging.
  std::function<void(const std::string&)> request_log;
  // Milliseconds since the epoch; injectable for reproducible tests.
  std::function<std::int64_t()> clock;

  // JSON keys: data_dir, bundle, corpus, threshold, bind, port and tokens
  // (a list of {token, id, role}). Keys absent from the text keep `base`.
  static ServiceConfig from_json(std::string_view text, ServiceConfig base);
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string authorization;  // raw Authorization header
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON
};

// Session intake, classification, triage, corpus curation, questionnaires,
// retraining and metrics over an append-only data directory. Requests may
// arrive concurrently. Published (bundle, corpus) snapshots are immutable;
// each prediction records the versions that produced it.
class Service {
 public:
  // Replays every log in data_dir and resumes sessions left unprocessed.
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ApiResponse handle(const ApiRequest& request);

  // Blocks until no session is queued (or processing is paused) and no
  // retrain job is active.
  void wait_idle();
  // Paused intake still accepts and persists sessions but classifies none.
  void set_processing_paused(bool paused);

  std::uint64_t bundle_version() const;
  std::uint64_t corpus_version() const;

  // Canonical JSON of all persisted state (sessions, corpus, questionnaires,
  // jobs, versions); equal digests mean equal state.
  std::string state_digest() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Serves `service` over HTTP until stop() is called.
class HttpServer {
 public:
  HttpServer(Service& service, std::string host, int port);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start();
  // Serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string host_;
  int port_;
};

}  // namespace depscreen

#endif  // DEPSCREEN_SERVICE_H_
