#pragma once

#include "labloom/plugin.hpp"

#include <chrono>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <sys/types.h>

namespace labloom {

/// What the host requires of an external plugin's handshake descriptor.
struct DescriptorExpectations {
  std::optional<std::string> name;
  std::optional<ModuleKind> module_kind;
  std::vector<std::string> methods;
};

/// A plugin living in a child process, spoken to over JSON lines on
/// stdin/stdout. One invocation at a time; the process is shut down when
/// the handle is destroyed.
class ExternalPlugin final : public Plugin {
 public:
  ~ExternalPlugin() override;
  ExternalPlugin(const ExternalPlugin&) = delete;
  ExternalPlugin& operator=(const ExternalPlugin&) = delete;

  const PluginDescriptor& descriptor() const override { return descriptor_; }
  InvokeResult invoke(const InvokeRequest& request) override;

  pid_t pid() const { return pid_; }
  void shutdown();

  /// Optional per-invocation timeout; none by default.
  void set_invoke_timeout(std::optional<std::chrono::milliseconds> timeout) { invoke_timeout_ = timeout; }

 private:
  friend std::shared_ptr<ExternalPlugin> spawn_external(const std::vector<std::string>&,
                                                        const DescriptorExpectations&,
                                                        std::chrono::milliseconds);
  ExternalPlugin() = default;

  void send(const json& message);
  /// Reads one line; nullopt on timeout, throws when the process is gone.
  std::optional<std::string> read_line(std::optional<std::chrono::milliseconds> timeout);

  PluginDescriptor descriptor_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::optional<std::chrono::milliseconds> invoke_timeout_;
  std::mutex mutex_;
};

/// Starts `argv`, performs the handshake and checks the descriptor.
/// Throws Error(plugin) on spawn failure, handshake timeout or mismatch.
std::shared_ptr<ExternalPlugin> spawn_external(const std::vector<std::string>& argv,
                                               const DescriptorExpectations& expectations = {},
                                               std::chrono::milliseconds handshake_timeout = std::chrono::seconds(5));

}  // namespace labloom
