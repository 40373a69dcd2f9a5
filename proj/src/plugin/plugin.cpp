#include "labloom/plugin.hpp"

#include "labloom/error.hpp"
#include "labloom/hash.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

namespace labloom {

std::string_view to_string(ParamType type) {
  switch (type) {
    case ParamType::number: return "number";
    case ParamType::integer: return "integer";
    case ParamType::boolean: return "boolean";
    case ParamType::text: return "text";
    case ParamType::enumeration: return "enum";
  }
  return "?";
}

std::optional<ParamType> parse_param_type(std::string_view text) {
  for (auto t : {ParamType::number, ParamType::integer, ParamType::boolean, ParamType::text, ParamType::enumeration}) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

namespace {

template <typename Seq>
auto find_named(const Seq& seq, std::string_view name) -> decltype(&*seq.begin()) {
  for (const auto& item : seq) {
    if (item.name == name) return &item;
  }
  return nullptr;
}

}  // namespace

const ParamSpec* MethodSpec::find_param(std::string_view name) const { return find_named(params, name); }
const PortSpec* MethodSpec::find_input(std::string_view name) const { return find_named(input_ports, name); }
const PortSpec* MethodSpec::find_output(std::string_view name) const { return find_named(output_ports, name); }
const MethodSpec* PluginDescriptor::find_method(std::string_view name) const { return find_named(methods, name); }

json coerce_param(const ParamSpec& spec, const json& value) {
  auto bad = [&](const std::string& why) -> Error {
    return Error(ErrorCode::schema, "parameter '" + spec.name + "' " + why + ", got " + value.dump());
  };
  switch (spec.type) {
    case ParamType::number: {
      double v = 0.0;
      if (value.is_number()) {
        v = value.get<double>();
      } else if (value.is_string()) {
        try {
          v = parse_number(value.get<std::string>());
        } catch (const Error&) {
          throw bad("must be a number");
        }
      } else {
        throw bad("must be a number");
      }
      if (!std::isfinite(v)) throw bad("must be finite");
      return v;
    }
    case ParamType::integer: {
      double v = 0.0;
      if (value.is_number_integer()) return value.get<std::int64_t>();
      if (value.is_number()) {
        v = value.get<double>();
      } else if (value.is_string()) {
        try {
          v = parse_number(value.get<std::string>());
        } catch (const Error&) {
          throw bad("must be an integer");
        }
      } else {
        throw bad("must be an integer");
      }
      if (!std::isfinite(v) || std::floor(v) != v) throw bad("must be an integer");
      return static_cast<std::int64_t>(v);
    }
    case ParamType::boolean: {
      if (value.is_boolean()) return value;
      if (value.is_string()) {
        const auto s = value.get<std::string>();
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
      }
      throw bad("must be true or false");
    }
    case ParamType::text: {
      if (value.is_string()) return value;
      if (value.is_number() || value.is_boolean()) return value.dump();
      throw bad("must be text");
    }
    case ParamType::enumeration: {
      if (!value.is_string()) throw bad("must be one of its enumerated values");
      const auto s = value.get<std::string>();
      if (std::find(spec.values.begin(), spec.values.end(), s) == spec.values.end()) {
        throw bad("must be one of its enumerated values");
      }
      return value;
    }
  }
  throw bad("has an unknown type");
}

void check_descriptor(const PluginDescriptor& d) {
  auto fail = [&](const std::string& why) { throw Error(ErrorCode::schema, "plugin '" + d.name + "': " + why); };
  if (d.name.empty()) fail("name must be non-empty");
  if (d.methods.empty()) fail("must declare at least one method");
  std::set<std::string> method_names;
  for (const auto& m : d.methods) {
    if (m.name.empty()) fail("method name must be non-empty");
    if (!method_names.insert(m.name).second) fail("duplicate method '" + m.name + "'");
    std::set<std::string> names;
    for (const auto& p : m.params) {
      if (p.name.empty()) fail("method '" + m.name + "' has an unnamed parameter");
      if (!names.insert(p.name).second) fail("method '" + m.name + "' repeats parameter '" + p.name + "'");
      if (p.required && p.default_value) fail("required parameter '" + p.name + "' must not have a default");
      if (p.type == ParamType::enumeration && p.values.empty()) fail("enum parameter '" + p.name + "' has no values");
      if (p.default_value) {
        try {
          coerce_param(p, *p.default_value);
        } catch (const Error& e) {
          fail(std::string("default invalid: ") + e.what());
        }
      }
    }
    for (const auto* ports : {&m.input_ports, &m.output_ports}) {
      std::set<std::string> port_names;
      for (const auto& port : *ports) {
        if (port.name.empty()) fail("method '" + m.name + "' has an unnamed port");
        if (!port_names.insert(port.name).second) fail("method '" + m.name + "' repeats port '" + port.name + "'");
      }
    }
  }
}

json resolve_params(const MethodSpec& method, const std::vector<std::pair<std::string, std::string>>& raw) {
  json out = json::object();
  for (const auto& [name, text] : raw) {
    const auto* spec = method.find_param(name);
    if (!spec) throw Error(ErrorCode::schema, "method '" + method.name + "' has no parameter '" + name + "'");
    out[name] = coerce_param(*spec, text);
  }
  for (const auto& p : method.params) {
    if (out.contains(p.name)) continue;
    if (p.default_value) {
      out[p.name] = coerce_param(p, *p.default_value);
    } else if (p.required) {
      throw Error(ErrorCode::schema, "method '" + method.name + "' is missing required parameter '" + p.name + "'");
    }
  }
  return out;
}

Table ArtifactValue::table() const {
  if (format != Format::csv) throw Error(ErrorCode::schema, "artifact is not tabular");
  return Table::from_csv(bytes);
}

json ArtifactValue::value() const {
  if (format != Format::json) throw Error(ErrorCode::schema, "artifact is not JSON");
  try {
    return json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, std::string("artifact JSON: ") + e.what());
  }
}

ArtifactValue ArtifactValue::of_table(DataKind kind, const Table& table) {
  ArtifactValue a;
  a.kind = kind;
  a.format = Format::csv;
  a.bytes = table.to_csv();
  return a;
}

ArtifactValue ArtifactValue::of_json(DataKind kind, const json& value) {
  ArtifactValue a;
  a.kind = kind;
  a.format = Format::json;
  a.bytes = value.dump();
  return a;
}

const ArtifactValue* InvokeRequest::input(std::string_view port) const {
  auto it = inputs.find(std::string(port));
  if (it == inputs.end() || it->second.empty()) return nullptr;
  return &it->second.front();
}

std::uint64_t InvokeRequest::rng_seed() const {
  if (rng_key.empty()) return 0;
  return std::stoull(rng_key, nullptr, 16);
}

namespace {

class FunctionPlugin final : public Plugin {
 public:
  FunctionPlugin(PluginDescriptor descriptor, PluginHandler handler)
      : descriptor_(std::move(descriptor)), handler_(std::move(handler)) {}

  const PluginDescriptor& descriptor() const override { return descriptor_; }
  InvokeResult invoke(const InvokeRequest& request) override { return handler_(request); }

 private:
  PluginDescriptor descriptor_;
  PluginHandler handler_;
};

}  // namespace

std::shared_ptr<Plugin> make_plugin(PluginDescriptor descriptor, PluginHandler handler) {
  return std::make_shared<FunctionPlugin>(std::move(descriptor), std::move(handler));
}

void PluginRegistry::register_plugin(std::shared_ptr<Plugin> plugin) {
  const auto& d = plugin->descriptor();
  check_descriptor(d);
  std::unique_lock lock(mutex_);
  auto key = std::make_pair(d.module_kind, d.name);
  if (plugins_.count(key)) {
    throw Error(ErrorCode::conflict,
                "plugin '" + d.name + "' is already registered for " + std::string(to_string(d.module_kind)));
  }
  plugins_.emplace(std::move(key), std::move(plugin));
}

void PluginRegistry::register_plugin(PluginDescriptor descriptor, PluginHandler handler) {
  register_plugin(make_plugin(std::move(descriptor), std::move(handler)));
}

std::shared_ptr<Plugin> PluginRegistry::find(ModuleKind kind, std::string_view name) const {
  std::shared_lock lock(mutex_);
  auto it = plugins_.find(std::make_pair(kind, std::string(name)));
  return it == plugins_.end() ? nullptr : it->second;
}

const PluginDescriptor* PluginRegistry::descriptor(ModuleKind kind, std::string_view name) const {
  auto p = find(kind, name);
  return p ? &p->descriptor() : nullptr;
}

std::vector<PluginDescriptor> PluginRegistry::list() const {
  std::shared_lock lock(mutex_);
  std::vector<PluginDescriptor> out;
  for (const auto& [key, plugin] : plugins_) out.push_back(plugin->descriptor());
  return out;
}

std::vector<std::pair<ModuleKind, std::string>> PluginRegistry::kinds_of(std::string_view name) const {
  std::shared_lock lock(mutex_);
  std::vector<std::pair<ModuleKind, std::string>> out;
  for (const auto& [key, plugin] : plugins_) {
    if (key.second == name) out.push_back(key);
  }
  return out;
}

void check_request(const MethodSpec& method, const InvokeRequest& request) {
  for (const auto& p : method.params) {
    if (!request.params.contains(p.name)) {
      if (p.required) {
        throw Error(ErrorCode::schema, "method '" + method.name + "' is missing required parameter '" + p.name + "'");
      }
      continue;
    }
    coerce_param(p, request.params.at(p.name));
  }
  for (const auto& [name, value] : request.params.items()) {
    if (!method.find_param(name)) {
      throw Error(ErrorCode::schema, "method '" + method.name + "' has no parameter '" + name + "'");
    }
  }
  for (const auto& port : method.input_ports) {
    auto it = request.inputs.find(port.name);
    if (it == request.inputs.end() || it->second.empty()) {
      if (!port.optional) {
        throw Error(ErrorCode::schema, "method '" + method.name + "' is missing input '" + port.name + "'");
      }
      continue;
    }
    for (const auto& a : it->second) {
      if (!kind_accepts(port.kind, a.kind)) {
        throw Error(ErrorCode::schema, "port type mismatch on '" + port.name + "': expected " +
                                           std::string(to_string(port.kind)) + ", got " +
                                           std::string(to_string(a.kind)));
      }
    }
  }
  for (const auto& [port, values] : request.inputs) {
    if (!method.find_input(port)) {
      throw Error(ErrorCode::schema, "method '" + method.name + "' has no input port '" + port + "'");
    }
  }
}

InvokeResult invoke_checked(Plugin& plugin, const MethodSpec& method, const InvokeRequest& request) {
  InvokeResult result;
  try {
    result = plugin.invoke(request);
  } catch (const std::exception& e) {
    return InvokeResult::failure(e.what());
  } catch (...) {
    return InvokeResult::failure("plugin raised a non-standard exception");
  }
  if (!result.ok()) return result;
  const std::string answer_port = result.interaction ? result.interaction->answer_port : std::string();
  for (const auto& port : method.output_ports) {
    if (port.name == answer_port) continue;
    auto it = result.outputs.find(port.name);
    if (it == result.outputs.end()) {
      return InvokeResult::failure("plugin did not populate output port '" + port.name + "'");
    }
    if (!kind_accepts(port.kind, it->second.kind)) {
      return InvokeResult::failure("plugin produced " + std::string(to_string(it->second.kind)) + " on port '" +
                                   port.name + "' declared " + std::string(to_string(port.kind)));
    }
    if (it->second.bytes.empty()) {
      return InvokeResult::failure("plugin produced an empty payload on port '" + port.name + "'");
    }
  }
  for (const auto& [port, value] : result.outputs) {
    if (!method.find_output(port) || port == answer_port) {
      return InvokeResult::failure("plugin produced undeclared output port '" + port + "'");
    }
  }
  if (result.interaction && !answer_port.empty() && !method.find_output(answer_port)) {
    return InvokeResult::failure("interaction answer port '" + answer_port + "' is not declared");
  }
  return result;
}

InvokeResult PluginRegistry::invoke(ModuleKind kind, const InvokeRequest& request) const {
  auto plugin = find(kind, request.plugin);
  if (!plugin) {
    throw Error(ErrorCode::not_found,
                "no " + std::string(to_string(kind)) + " plugin named '" + request.plugin + "'");
  }
  const auto* method = plugin->descriptor().find_method(request.method);
  if (!method) {
    throw Error(ErrorCode::schema, "plugin '" + request.plugin + "' has no method '" + request.method + "'");
  }
  check_request(*method, request);
  return invoke_checked(*plugin, *method, request);
}

}  // namespace labloom
