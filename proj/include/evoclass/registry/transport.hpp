#pragma once

#include <atomic>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

#include <httplib.h>

#include "evoclass/registry/service.hpp"

namespace evoclass::registry {

/// The service could not be reached or the exchange broke down. Never a status code.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual ApiResponse send(const ApiRequest& request) = 0;
  std::uint64_t calls() const noexcept { return calls_.load(); }

 protected:
  void count_call() noexcept { calls_.fetch_add(1); }

 private:
  std::atomic<std::uint64_t> calls_{0};
};

class InProcessTransport final : public Transport {
 public:
  explicit InProcessTransport(RegistryService& service) : service_(service) {}

  ApiResponse send(const ApiRequest& request) override {
    count_call();
    return service_.handle(request);
  }

 private:
  RegistryService& service_;
};

class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string host, int port) : client_(std::move(host), port) {
    client_.set_connection_timeout(5, 0);
    client_.set_read_timeout(30, 0);
    client_.set_follow_location(false);
  }

  ApiResponse send(const ApiRequest& request) override {
    count_call();
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto result = client_.Post(request.path, headers, request.body, "application/json");
    if (!result) throw TransportError("HTTP request failed: " + httplib::to_string(result.error()));
    ApiResponse response;
    response.statusCode = result->status;
    try {
      response.body = json::parse(result->body);
    } catch (const json::exception& e) {
      throw TransportError(std::string("malformed response body: ") + e.what());
    }
    if (result->has_header("Location")) response.headers["Location"] = result->get_header_value("Location");
    return response;
  }

 private:
  httplib::Client client_;
};

/// Serves a RegistryService over HTTP on a background thread.
class HttpServer {
 public:
  explicit HttpServer(RegistryService& service) : service_(service) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      ApiRequest request;
      request.method = req.method;
      request.path = req.path;
      request.body = req.body;
      for (const auto& [k, v] : req.headers) request.headers.emplace(k, v);
      const ApiResponse response = service_.handle(request);
      res.status = response.statusCode;
      for (const auto& [k, v] : response.headers) res.set_header(k, v);
      res.set_content(response.body_text(), "application/json");
    };
    server_.Post(std::string(kValidationPath), route);
    server_.Post(std::string(kAggregationPath), route);
  }

  ~HttpServer() { stop(); }

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and starts listening; port 0 picks a free port. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw TransportError("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  // Blocks the calling thread.
  void listen(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw TransportError("cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }

 private:
  RegistryService& service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace evoclass::registry
