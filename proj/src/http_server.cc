// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <thread>

#include "depscreen/errors.h"
#include "depscreen/service.h"

namespace depscreen {

struct HttpServer::Impl {
  httplib::Server server;
  std::thread thread;
};

namespace {

void forward(Service& service, const httplib::Request& req, httplib::Response& res) {
  ApiRequest api;
  api.method = req.method;
  api.path = req.path;
  for (const auto& [key, value] : req.params) api.query.emplace(key, value);
  api.authorization = req.get_header_value("Authorization");
  api.body = req.body;
  const ApiResponse out = service.handle(api);
  res.status = out.status;
  res.set_content(out.body, "application/json");
}

}  // namespace

HttpServer::HttpServer(Service& service, std::string host, int port)
    : impl_(std::make_unique<Impl>()), host_(std::move(host)), port_(port) {
  auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
    forward(service, req, res);
  };
  const char* kAny = R"(/.*)";
  impl_->server.Get(kAny, handler);
  impl_->server.Post(kAny, handler);
  impl_->server.Put(kAny, handler);
  impl_->server.Delete(kAny, handler);
  // The dashboard is served from another origin.
  impl_->server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  impl_->server.Options(kAny, [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  if (port_ == 0) {
    port_ = impl_->server.bind_to_any_port(host_);
  } else if (!impl_->server.bind_to_port(host_, port_)) {
    port_ = -1;
  }
  if (port_ < 0) throw IoError("cannot bind " + host_);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void HttpServer::run() {
  if (port_ == 0) {
    port_ = impl_->server.bind_to_any_port(host_);
  } else if (!impl_->server.bind_to_port(host_, port_)) {
    port_ = -1;
  }
  if (port_ < 0) throw IoError("cannot bind " + host_);
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace depscreen
