#pragma once

#include "labloom/engine.hpp"
#include "labloom/error.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace labloom {

/// Error body of every failed request: {"code": ..., "message": ...}.
struct ApiError {
  int status = 400;
  std::string code;  // not-found | conflict | invalid | gone
  std::string message;

  json to_json() const { return {{"code", code}, {"message", message}}; }
};

ApiError api_error(const Error& error);

struct ServiceOptions {
  /// Folder sources of specs posted over the API resolve here.
  std::filesystem::path base_dir = std::filesystem::current_path();
  /// Served at `/` when set.
  std::filesystem::path static_dir;
  /// Force interaction timeouts to zero for runs started through the API.
  bool headless = false;
};

/// HTTP/JSON front of an Engine with a server-sent event stream per run.
class ControlService {
 public:
  ControlService(Engine& engine, ServiceOptions options = {});
  ~ControlService();
  ControlService(const ControlService&) = delete;
  ControlService& operator=(const ControlService&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port; throws Error(io) when binding fails.
  int start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  void install_routes();

  Engine& engine_;
  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  int port_ = 0;
};

/// Splits `host:port` (host optional, default 127.0.0.1).
std::pair<std::string, int> parse_address(const std::string& address);

/// Copies spec with all interaction timeouts set to zero.
WorkflowSpec headless_spec(WorkflowSpec spec);

}  // namespace labloom
