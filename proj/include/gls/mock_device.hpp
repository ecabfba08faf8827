#pragma once

#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "gls/dispatch.hpp"

namespace gls {

/// In-process HTTP device speaking the IFTTT webhook shape. Responses are
/// scripted: queued status codes are consumed first, then `default_status`.
/// A key may be acknowledged with 2xx at most once; a repeat is answered
/// with 409 and counted as a duplicate.
class MockDeviceServer {
 public:
  struct Request {
    std::string event;
    std::string key;
    std::string body;
    std::string idempotency_key;
    int status = 0;
  };

  explicit MockDeviceServer(std::string expected_key = {}, std::string host = "127.0.0.1", int port = 0)
      : expected_key_(std::move(expected_key)), host_(std::move(host)) {
    server_.Post(R"(/trigger/([^/]+)/with/key/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res);
    });
    port_ = port == 0 ? server_.bind_to_any_port(host_) : (server_.bind_to_port(host_, port) ? port : -1);
    if (port_ <= 0) throw Error(ErrorKind::Io, "mock device server could not bind");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  MockDeviceServer(const MockDeviceServer&) = delete;
  MockDeviceServer& operator=(const MockDeviceServer&) = delete;

  ~MockDeviceServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  std::string base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

  void script(std::vector<int> statuses) {
    std::lock_guard lock(mutex_);
    script_.assign(statuses.begin(), statuses.end());
  }
  void set_default_status(int status) {
    std::lock_guard lock(mutex_);
    default_status_ = status;
  }

  std::vector<Request> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }
  int duplicate_successes() const {
    std::lock_guard lock(mutex_);
    return duplicates_;
  }
  std::map<std::string, int> successes_by_key() const {
    std::lock_guard lock(mutex_);
    return successes_;
  }
  void reset() {
    std::lock_guard lock(mutex_);
    requests_.clear();
    successes_.clear();
    script_.clear();
    duplicates_ = 0;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    Request r{req.matches[1], req.matches[2], req.body, req.get_header_value(kIdempotencyHeader), 0};
    if (!expected_key_.empty() && r.key != expected_key_) {
      r.status = 401;
    } else if (!script_.empty()) {
      r.status = script_.front();
      script_.pop_front();
    } else {
      r.status = default_status_;
    }
    if (r.status >= 200 && r.status < 300) {
      if (successes_[r.idempotency_key] > 0) {
        ++duplicates_;
        r.status = 409;
      } else {
        successes_[r.idempotency_key] = 1;
      }
    }
    res.status = r.status;
    res.set_content(r.status < 300 ? "Congratulations! You've fired the " + r.event + " event" : "error", "text/plain");
    requests_.push_back(std::move(r));
  }

  std::string expected_key_;
  std::string host_;
  int port_ = 0;
  httplib::Server server_;
  std::thread thread_;

  mutable std::mutex mutex_;
  std::deque<int> script_;
  int default_status_ = 200;
  std::vector<Request> requests_;
  std::map<std::string, int> successes_;
  int duplicates_ = 0;
};

}  // namespace gls
