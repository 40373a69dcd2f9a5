#include "labloom/validate.hpp"

#include "labloom/error.hpp"
#include "labloom/plan.hpp"

#include <algorithm>
#include <sstream>

namespace labloom {

void ValidationReport::error(std::string location, std::string message) {
  issues.push_back({Severity::error, std::move(location), std::move(message)});
  ok = false;
}

void ValidationReport::warning(std::string location, std::string message) {
  issues.push_back({Severity::warning, std::move(location), std::move(message)});
}

std::size_t ValidationReport::error_count() const {
  return static_cast<std::size_t>(
      std::count_if(issues.begin(), issues.end(), [](const auto& i) { return i.severity == Severity::error; }));
}

std::string ValidationReport::to_text() const {
  std::ostringstream out;
  for (const auto& i : issues) {
    out << (i.severity == Severity::error ? "error" : "warning") << ' ' << i.location << ": " << i.message << '\n';
  }
  return out.str();
}

json ValidationReport::to_json() const {
  json list = json::array();
  for (const auto& i : issues) {
    list.push_back({{"severity", i.severity == Severity::error ? "error" : "warning"},
                    {"location", i.location},
                    {"message", i.message}});
  }
  return {{"ok", ok}, {"issues", list}};
}

std::string binding_label(const DataBinding& b) {
  std::string src;
  if (const auto* n = b.node_source()) {
    src = n->node + "." + n->port;
  } else {
    const auto* f = b.folder_source();
    src = f->path + "/" + f->pattern;
  }
  return b.target_node + "." + b.target_port + "<-" + src;
}

NodeInterface node_interface(const NodeSpec& node, const PluginRegistry& registry) {
  NodeInterface ni;
  ni.plugin = registry.find(node.kind, node.plugin);
  if (!ni.plugin) {
    throw Error(ErrorCode::not_found,
                "unknown " + std::string(to_string(node.kind)) + " plugin '" + node.plugin + "'");
  }
  const auto& d = ni.plugin->descriptor();
  ni.calls = node.methods;
  if (ni.calls.empty() && node.kind == ModuleKind::output) ni.calls.push_back({d.methods.front().name, {}});
  for (const auto& call : ni.calls) {
    const auto* m = d.find_method(call.name);
    if (!m) throw Error(ErrorCode::schema, "plugin '" + d.name + "' has no method '" + call.name + "'");
    for (const auto& port : m->input_ports) {
      bool from_earlier = false;
      for (const auto* earlier : ni.methods) from_earlier = from_earlier || earlier->find_output(port.name);
      if (from_earlier) ni.chained.insert(port.name);
      auto [it, fresh] = ni.inputs.emplace(port.name, port);
      if (!fresh && it->second.kind != port.kind) {
        throw Error(ErrorCode::schema, "methods of '" + node.id + "' disagree on the kind of input '" + port.name + "'");
      }
      if (!fresh) it->second.optional = it->second.optional && port.optional;
    }
    for (const auto& port : m->output_ports) {
      if (!ni.outputs.emplace(port.name, port).second) {
        throw Error(ErrorCode::schema, "methods of '" + node.id + "' both produce output '" + port.name + "'");
      }
    }
    ni.methods.push_back(m);
  }
  return ni;
}

namespace {

void check_node(const NodeSpec& node, const PluginRegistry& registry, ValidationReport& report,
                std::map<std::string, NodeInterface>& interfaces) {
  if (!registry.find(node.kind, node.plugin)) {
    const auto others = registry.kinds_of(node.plugin);
    if (!others.empty()) {
      report.error(node.id, "plugin kind mismatch: '" + node.plugin + "' is a " +
                                std::string(to_string(others.front().first)) + " plugin, not " +
                                std::string(to_string(node.kind)));
    } else {
      report.error(node.id, "unknown " + std::string(to_string(node.kind)) + " plugin '" + node.plugin + "'");
    }
    return;
  }
  if (node.methods.empty() && node.kind != ModuleKind::output) {
    report.error(node.id, "node needs at least one <method>");
    return;
  }
  NodeInterface ni;
  try {
    ni = node_interface(node, registry);
  } catch (const Error& e) {
    report.error(node.id, e.what());
    return;
  }
  for (std::size_t i = 0; i < ni.calls.size(); ++i) {
    try {
      resolve_params(*ni.methods[i], ni.calls[i].params);
    } catch (const Error& e) {
      report.error(node.id, e.what());
    }
  }
  interfaces.emplace(node.id, std::move(ni));
}

}  // namespace

ValidationReport validate(const WorkflowSpec& spec, const PluginRegistry& registry) {
  ValidationReport report;

  const auto count = [&](ModuleKind k) {
    return std::count_if(spec.nodes.begin(), spec.nodes.end(), [&](const auto& n) { return n.kind == k; });
  };
  if (count(ModuleKind::initialiser) != 1) {
    report.error(spec.name, "workflow needs exactly one Initialiser node, found " +
                                std::to_string(count(ModuleKind::initialiser)));
  }
  if (count(ModuleKind::output) < 1) report.error(spec.name, "workflow needs at least one Output node");

  std::map<std::string, NodeInterface> interfaces;
  for (const auto& node : spec.nodes) check_node(node, registry, report, interfaces);

  // Bindings: ports exist and kinds agree.
  std::map<std::pair<std::string, std::string>, std::pair<bool, bool>> fed;  // (forward, back)
  for (const auto& b : spec.bindings) {
    const auto label = binding_label(b);
    auto target = interfaces.find(b.target_node);
    if (target == interfaces.end()) continue;  // node already reported
    auto port = target->second.inputs.find(b.target_port);
    if (port == target->second.inputs.end()) {
      report.error(label, "node '" + b.target_node + "' has no input port '" + b.target_port + "'");
      continue;
    }
    DataKind produced = DataKind::any;
    if (const auto* src = b.node_source()) {
      auto source = interfaces.find(src->node);
      if (source == interfaces.end()) continue;
      auto out = source->second.outputs.find(src->port);
      if (out == source->second.outputs.end()) {
        report.error(label, "node '" + src->node + "' has no output port '" + src->port + "'");
        continue;
      }
      produced = out->second.kind;
    } else {
      produced = b.folder_source()->format == Format::csv ? DataKind::table : DataKind::document;
    }
    if (!kind_accepts(port->second.kind, produced)) {
      report.error(label, "port type mismatch: " + std::string(to_string(produced)) + " into " +
                              std::string(to_string(port->second.kind)));
    }
    auto& f = fed[{b.target_node, b.target_port}];
    (is_back_edge(spec, b) ? f.second : f.first) = true;
  }

  // Required inputs.
  for (const auto& [id, ni] : interfaces) {
    for (const auto& [name, port] : ni.inputs) {
      if (port.optional || ni.chained.count(name)) continue;
      auto it = fed.find({id, name});
      if (it == fed.end()) {
        report.error(id, "required input '" + name + "' is not bound");
      } else if (!it->second.first) {
        report.error(id, "required input '" + name + "' is fed only by a loop back-edge");
      }
    }
  }

  for (const auto& l : spec.loops) {
    if (const auto* pred = std::get_if<PredicatePort>(&l.condition)) {
      if (!l.contains(pred->node)) {
        report.error(l.id, "predicate node '" + pred->node + "' is outside the loop body");
      } else if (auto it = interfaces.find(pred->node); it != interfaces.end()) {
        auto out = it->second.outputs.find(pred->port);
        if (out == it->second.outputs.end()) {
          report.error(l.id, "predicate node '" + pred->node + "' has no output port '" + pred->port + "'");
        } else if (out->second.kind != DataKind::boolean) {
          report.error(l.id, "predicate port '" + pred->port + "' is not boolean");
        }
      }
    }
  }

  try {
    plan(spec);
  } catch (const Error& e) {
    std::string location = spec.name;
    const std::string what = e.what();
    report.error(location, what);
  }
  return report;
}

}  // namespace labloom
