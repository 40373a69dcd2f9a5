#include "labloom/external_plugin.hpp"

#include "labloom/error.hpp"
#include "labloom/plugin_wire.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace labloom {

namespace {

constexpr std::string_view kExited = "plugin process exited";

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

}  // namespace

ExternalPlugin::~ExternalPlugin() { shutdown(); }

void ExternalPlugin::shutdown() {
  std::lock_guard lock(mutex_);
  if (pid_ <= 0) return;
  if (to_child_ >= 0) {
    const std::string line = json{{"type", "shutdown"}}.dump() + "\n";
    (void)::send(to_child_, line.data(), line.size(), MSG_NOSIGNAL);
  }
  close_fd(to_child_);
  close_fd(from_child_);
  // Give the child a moment to exit on its own before forcing it.
  for (int i = 0; i < 50; ++i) {
    if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
      pid_ = -1;
      return;
    }
    ::usleep(10'000);
  }
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, nullptr, 0);
  pid_ = -1;
}

void ExternalPlugin::send(const json& message) {
  const std::string line = message.dump() + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    const auto n = ::send(to_child_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::plugin, std::string(kExited));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> ExternalPlugin::read_line(std::optional<std::chrono::milliseconds> timeout) {
  const auto deadline = timeout ? std::chrono::steady_clock::now() + *timeout
                                : std::chrono::steady_clock::time_point::max();
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    int wait_ms = -1;
    if (timeout) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      wait_ms = static_cast<int>(left.count());
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::plugin, std::string("poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) return std::nullopt;
    char buf[4096];
    const auto n = ::read(from_child_, buf, sizeof(buf));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::plugin, std::string(kExited));
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

InvokeResult ExternalPlugin::invoke(const InvokeRequest& request) {
  std::lock_guard lock(mutex_);
  if (pid_ <= 0) return InvokeResult::failure(std::string(kExited));
  const auto* method = descriptor_.find_method(request.method);
  if (!method) return InvokeResult::failure("plugin has no method '" + request.method + "'");
  try {
    send(wire::invoke_message(request));
    auto line = read_line(invoke_timeout_);
    if (!line) return InvokeResult::failure("plugin invocation timed out");
    return wire::parse_result(json::parse(*line), *method);
  } catch (const Error& e) {
    // A dead process never comes back; reap it so later calls fail fast.
    if (::waitpid(pid_, nullptr, WNOHANG) == pid_) pid_ = -1;
    return InvokeResult::failure(e.what());
  } catch (const json::exception& e) {
    return InvokeResult::failure(std::string("malformed result line: ") + e.what());
  }
}

std::shared_ptr<ExternalPlugin> spawn_external(const std::vector<std::string>& argv,
                                               const DescriptorExpectations& expectations,
                                               std::chrono::milliseconds handshake_timeout) {
  if (argv.empty()) throw Error(ErrorCode::plugin, "empty plugin command line");
  int in_pair[2];
  int out_pair[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0) {
    throw Error(ErrorCode::plugin, std::string("socketpair: ") + std::strerror(errno));
  }
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, out_pair) != 0) {
    ::close(in_pair[0]);
    ::close(in_pair[1]);
    throw Error(ErrorCode::plugin, std::string("socketpair: ") + std::strerror(errno));
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pair[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pair[1], STDOUT_FILENO);

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pair[1]);
  ::close(out_pair[1]);
  if (rc != 0) {
    ::close(in_pair[0]);
    ::close(out_pair[0]);
    throw Error(ErrorCode::plugin, "cannot start '" + argv[0] + "': " + std::strerror(rc));
  }

  std::shared_ptr<ExternalPlugin> handle(new ExternalPlugin());
  handle->pid_ = pid;
  handle->to_child_ = in_pair[0];
  handle->from_child_ = out_pair[0];

  std::optional<std::string> line;
  try {
    handle->send(json{{"type", "handshake"}});
    line = handle->read_line(handshake_timeout);
  } catch (const Error& e) {
    throw Error(ErrorCode::plugin, std::string("handshake failed: ") + e.what());
  }
  if (!line) {
    throw Error(ErrorCode::plugin, "handshake timed out after " + std::to_string(handshake_timeout.count()) + " ms");
  }
  try {
    handle->descriptor_ = wire::parse_descriptor(json::parse(*line));
  } catch (const std::exception& e) {
    throw Error(ErrorCode::plugin, std::string("handshake failed: ") + e.what());
  }

  const auto& d = handle->descriptor_;
  if (expectations.name && *expectations.name != d.name) {
    throw Error(ErrorCode::plugin, "descriptor mismatch: expected plugin '" + *expectations.name + "', got '" + d.name + "'");
  }
  if (expectations.module_kind && *expectations.module_kind != d.module_kind) {
    throw Error(ErrorCode::plugin, "descriptor mismatch: expected kind " +
                                       std::string(to_string(*expectations.module_kind)) + ", got " +
                                       std::string(to_string(d.module_kind)));
  }
  for (const auto& m : expectations.methods) {
    if (!d.find_method(m)) throw Error(ErrorCode::plugin, "descriptor mismatch: missing method '" + m + "'");
  }
  return handle;
}

}  // namespace labloom
