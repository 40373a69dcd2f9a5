#pragma once

#include "labloom/iteration.hpp"
#include "labloom/kinds.hpp"
#include "labloom/table.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace labloom {

using json = nlohmann::json;

enum class ParamType { number, integer, boolean, text, enumeration };

std::string_view to_string(ParamType type);
std::optional<ParamType> parse_param_type(std::string_view text);

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::number;
  std::vector<std::string> values;  // enumeration members
  std::optional<json> default_value;
  bool required = false;

  bool operator==(const ParamSpec&) const = default;
};

struct PortSpec {
  std::string name;
  DataKind kind = DataKind::any;
  /// Optional inputs may stay unbound or resolve to nothing (first pass of a back-edge).
  bool optional = false;

  bool operator==(const PortSpec&) const = default;
};

struct MethodSpec {
  std::string name;
  std::vector<ParamSpec> params;
  std::vector<PortSpec> input_ports;
  std::vector<PortSpec> output_ports;

  const ParamSpec* find_param(std::string_view name) const;
  const PortSpec* find_input(std::string_view name) const;
  const PortSpec* find_output(std::string_view name) const;

  bool operator==(const MethodSpec&) const = default;
};

struct PluginDescriptor {
  std::string name;
  ModuleKind module_kind = ModuleKind::data_processing;
  std::vector<MethodSpec> methods;
  std::string version = "1.0.0";

  const MethodSpec* find_method(std::string_view name) const;

  bool operator==(const PluginDescriptor&) const = default;
};

/// Throws Error(schema) when the descriptor breaks its own invariants.
void check_descriptor(const PluginDescriptor& descriptor);

/// Coerces one value (JSON or its text form) to the declared parameter type.
json coerce_param(const ParamSpec& spec, const json& value);

/// Typed parameter object for a method: raw spec text plus defaults.
/// Throws Error(schema) for unknown, missing or ill-typed parameters.
json resolve_params(const MethodSpec& method, const std::vector<std::pair<std::string, std::string>>& raw);

/// One artifact handed to or returned from a plugin.
struct ArtifactValue {
  DataKind kind = DataKind::scalar;
  Format format = Format::json;
  std::string bytes;
  std::string id;    // empty until stored
  std::string path;  // datastore location, empty for fresh outputs

  Table table() const;
  json value() const;

  static ArtifactValue of_table(DataKind kind, const Table& table);
  static ArtifactValue of_json(DataKind kind, const json& value);

  bool operator==(const ArtifactValue& other) const {
    return kind == other.kind && format == other.format && bytes == other.bytes;
  }
};

struct InvokeRequest {
  std::string plugin;
  std::string method;
  json params = json::object();
  /// Each port may receive several artifacts (folder sources, repeated bindings).
  std::map<std::string, std::vector<ArtifactValue>> inputs;
  std::string rng_key;  // 16 hex digits
  IterationVector iteration;
  /// Directory relative file parameters resolve against (the spec's folder).
  std::filesystem::path base_dir;

  const ArtifactValue* input(std::string_view port) const;
  std::uint64_t rng_seed() const;

  template <typename T>
  T param(std::string_view name) const {
    return params.at(std::string(name)).get<T>();
  }
};

/// A human decision a plugin asks the engine to obtain before its node completes.
struct InteractionSpec {
  std::string kind;  // approve-suggestions | edit-config | label-item
  std::string prompt;
  std::string answer_port;
  json default_action;
  std::vector<std::string> payload_ports;
  std::optional<double> timeout_s;
};

enum class InvokeStatus { ok, error };

struct InvokeResult {
  InvokeStatus status = InvokeStatus::ok;
  std::string message;
  std::map<std::string, ArtifactValue> outputs;
  std::map<std::string, json> diagnostics;  // number or text values
  std::optional<InteractionSpec> interaction;

  static InvokeResult failure(std::string message) {
    InvokeResult r;
    r.status = InvokeStatus::error;
    r.message = std::move(message);
    return r;
  }

  bool ok() const { return status == InvokeStatus::ok; }

  bool operator==(const InvokeResult& o) const {
    return status == o.status && message == o.message && outputs == o.outputs && diagnostics == o.diagnostics;
  }
};

class Plugin {
 public:
  virtual ~Plugin() = default;
  virtual const PluginDescriptor& descriptor() const = 0;
  virtual InvokeResult invoke(const InvokeRequest& request) = 0;
};

using PluginHandler = std::function<InvokeResult(const InvokeRequest&)>;

/// In-process plugin whose methods dispatch to one handler.
std::shared_ptr<Plugin> make_plugin(PluginDescriptor descriptor, PluginHandler handler);

/// Plugins resolvable by (module kind, name). Names are namespaced per kind.
class PluginRegistry {
 public:
  /// Throws Error(schema) for a malformed descriptor, Error(conflict) for a duplicate.
  void register_plugin(std::shared_ptr<Plugin> plugin);
  void register_plugin(PluginDescriptor descriptor, PluginHandler handler);

  std::shared_ptr<Plugin> find(ModuleKind kind, std::string_view name) const;
  const PluginDescriptor* descriptor(ModuleKind kind, std::string_view name) const;
  std::vector<PluginDescriptor> list() const;
  /// Every registered name, any kind; used for "wrong kind" diagnostics.
  std::vector<std::pair<ModuleKind, std::string>> kinds_of(std::string_view name) const;

  /// Checks the request against the MethodSpec, runs the plugin and checks
  /// its result. Schema problems throw Error(schema) before plugin code runs;
  /// anything the plugin throws becomes status=error.
  InvokeResult invoke(ModuleKind kind, const InvokeRequest& request) const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::pair<ModuleKind, std::string>, std::shared_ptr<Plugin>, std::less<>> plugins_;
};

/// Checks inputs and params of a request against a method (no plugin call).
void check_request(const MethodSpec& method, const InvokeRequest& request);

/// Invokes with isolation: exceptions turn into status=error and ok results
/// are checked to populate exactly the declared output ports.
InvokeResult invoke_checked(Plugin& plugin, const MethodSpec& method, const InvokeRequest& request);

}  // namespace labloom
