#include "labloom/plugin_wire.hpp"

#include "labloom/error.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace labloom::wire {

namespace {

json port_json(const PortSpec& p) {
  json j = {{"name", p.name}, {"kind", std::string(to_string(p.kind))}};
  if (p.optional) j["optional"] = true;
  return j;
}

PortSpec parse_port(const json& j) {
  PortSpec p;
  p.name = j.at("name").get<std::string>();
  const auto kind = parse_data_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::schema, "unknown data kind in descriptor port '" + p.name + "'");
  p.kind = *kind;
  p.optional = j.value("optional", false);
  return p;
}

json encode_artifact(const ArtifactValue& a) {
  json j = {{"kind", std::string(to_string(a.kind))}};
  if (a.bytes.size() >= kInlineLimit && !a.path.empty()) {
    j["ref"] = a.path;
  } else if (a.format == Format::json) {
    j["inline"] = json::parse(a.bytes);
  } else {
    j["inline"] = a.bytes;
  }
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read artifact reference '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ArtifactValue decode_artifact(const json& j, DataKind declared) {
  ArtifactValue a;
  a.kind = declared;
  if (j.contains("kind")) {
    const auto k = parse_data_kind(j.at("kind").get<std::string>());
    if (!k) throw Error(ErrorCode::schema, "unknown artifact kind on the wire");
    a.kind = *k;
  }
  a.format = format_for(a.kind);
  if (j.contains("ref")) {
    a.path = j.at("ref").get<std::string>();
    a.bytes = read_file(a.path);
  } else if (j.contains("inline")) {
    const auto& v = j.at("inline");
    if (a.format == Format::csv) {
      if (!v.is_string()) throw Error(ErrorCode::schema, "tabular artifact must travel as CSV text");
      a.bytes = v.get<std::string>();
    } else {
      a.bytes = v.dump();
    }
  } else {
    throw Error(ErrorCode::schema, "artifact needs 'ref' or 'inline'");
  }
  return a;
}

}  // namespace

json descriptor_message(const PluginDescriptor& d) {
  json methods = json::array();
  for (const auto& m : d.methods) {
    json params = json::array();
    for (const auto& p : m.params) {
      json pj = {{"name", p.name}, {"type", std::string(to_string(p.type))}, {"required", p.required}};
      if (!p.values.empty()) pj["values"] = p.values;
      if (p.default_value) pj["default"] = *p.default_value;
      params.push_back(std::move(pj));
    }
    json in = json::array();
    json out = json::array();
    for (const auto& p : m.input_ports) in.push_back(port_json(p));
    for (const auto& p : m.output_ports) out.push_back(port_json(p));
    methods.push_back({{"name", m.name}, {"params", params}, {"input_ports", in}, {"output_ports", out}});
  }
  return {{"type", "descriptor"},
          {"name", d.name},
          {"module_kind", std::string(to_string(d.module_kind))},
          {"version", d.version},
          {"methods", methods}};
}

PluginDescriptor parse_descriptor(const json& message) {
  try {
    if (message.at("type") != "descriptor") throw Error(ErrorCode::plugin, "expected a descriptor message");
    PluginDescriptor d;
    d.name = message.at("name").get<std::string>();
    const auto kind = parse_module_kind(message.at("module_kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::schema, "unknown module kind in descriptor");
    d.module_kind = *kind;
    d.version = message.value("version", std::string("0"));
    for (const auto& mj : message.at("methods")) {
      MethodSpec m;
      m.name = mj.at("name").get<std::string>();
      for (const auto& pj : mj.value("params", json::array())) {
        ParamSpec p;
        p.name = pj.at("name").get<std::string>();
        const auto type = parse_param_type(pj.at("type").get<std::string>());
        if (!type) throw Error(ErrorCode::schema, "unknown parameter type for '" + p.name + "'");
        p.type = *type;
        p.required = pj.value("required", false);
        if (pj.contains("values")) p.values = pj.at("values").get<std::vector<std::string>>();
        if (pj.contains("default")) p.default_value = pj.at("default");
        m.params.push_back(std::move(p));
      }
      for (const auto& pj : mj.value("input_ports", json::array())) m.input_ports.push_back(parse_port(pj));
      for (const auto& pj : mj.value("output_ports", json::array())) m.output_ports.push_back(parse_port(pj));
      d.methods.push_back(std::move(m));
    }
    check_descriptor(d);
    return d;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema, std::string("malformed descriptor: ") + e.what());
  }
}

json invoke_message(const InvokeRequest& r) {
  json inputs = json::object();
  for (const auto& [port, values] : r.inputs) {
    if (values.size() == 1) {
      inputs[port] = encode_artifact(values.front());
    } else {
      json arr = json::array();
      for (const auto& v : values) arr.push_back(encode_artifact(v));
      inputs[port] = std::move(arr);
    }
  }
  return {{"type", "invoke"},
          {"method", r.method},
          {"params", r.params},
          {"inputs", inputs},
          {"rng_key", r.rng_key},
          {"iteration", r.iteration.render()}};
}

InvokeRequest parse_invoke(const json& message, const PluginDescriptor& descriptor) {
  InvokeRequest r;
  r.plugin = descriptor.name;
  r.method = message.at("method").get<std::string>();
  const auto* method = descriptor.find_method(r.method);
  if (!method) throw Error(ErrorCode::schema, "plugin '" + descriptor.name + "' has no method '" + r.method + "'");
  r.params = message.value("params", json::object());
  r.rng_key = message.value("rng_key", std::string());
  r.iteration = IterationVector::parse(message.value("iteration", std::string("root")));
  const json inputs = message.value("inputs", json::object());
  for (const auto& [port, value] : inputs.items()) {
    const auto* spec = method->find_input(port);
    const DataKind declared = spec ? spec->kind : DataKind::any;
    auto& slot = r.inputs[port];
    if (value.is_array()) {
      for (const auto& v : value) slot.push_back(decode_artifact(v, declared));
    } else {
      slot.push_back(decode_artifact(value, declared));
    }
  }
  return r;
}

json result_message(const InvokeResult& result) {
  if (!result.ok()) return {{"type", "result"}, {"status", "error"}, {"message", result.message}};
  json outputs = json::object();
  for (const auto& [port, value] : result.outputs) outputs[port] = encode_artifact(value);
  json diagnostics = json::object();
  for (const auto& [k, v] : result.diagnostics) diagnostics[k] = v;
  return {{"type", "result"}, {"status", "ok"}, {"outputs", outputs}, {"diagnostics", diagnostics}};
}

InvokeResult parse_result(const json& message, const MethodSpec& method) {
  try {
    if (message.at("type") != "result") return InvokeResult::failure("expected a result message");
    if (message.at("status") != "ok") return InvokeResult::failure(message.value("message", std::string("error")));
    InvokeResult r;
    const json outputs = message.value("outputs", json::object());
    for (const auto& [port, value] : outputs.items()) {
      const auto* spec = method.find_output(port);
      r.outputs.emplace(port, decode_artifact(value, spec ? spec->kind : DataKind::any));
    }
    const json diagnostics = message.value("diagnostics", json::object());
    for (const auto& [k, v] : diagnostics.items()) {
      if (!v.is_number() && !v.is_string()) return InvokeResult::failure("diagnostic '" + k + "' is not number or text");
      r.diagnostics.emplace(k, v);
    }
    return r;
  } catch (const std::exception& e) {
    return InvokeResult::failure(std::string("malformed result: ") + e.what());
  }
}

int serve(Plugin& plugin, std::istream& in, std::ostream& out) {
  const auto& d = plugin.descriptor();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json message;
    try {
      message = json::parse(line);
    } catch (const json::parse_error& e) {
      out << json{{"type", "result"}, {"status", "error"}, {"message", std::string("bad message: ") + e.what()}}.dump()
          << '\n'
          << std::flush;
      continue;
    }
    const auto type = message.value("type", std::string());
    if (type == "handshake") {
      out << descriptor_message(d).dump() << '\n' << std::flush;
    } else if (type == "invoke") {
      InvokeResult result;
      try {
        auto request = parse_invoke(message, d);
        const auto* method = d.find_method(request.method);
        check_request(*method, request);
        result = invoke_checked(plugin, *method, request);
      } catch (const std::exception& e) {
        result = InvokeResult::failure(e.what());
      }
      out << result_message(result).dump() << '\n' << std::flush;
    } else if (type == "shutdown") {
      return 0;
    } else {
      out << json{{"type", "result"}, {"status", "error"}, {"message", "unknown message type '" + type + "'"}}.dump()
          << '\n'
          << std::flush;
    }
  }
  return 0;
}

}  // namespace labloom::wire
