#pragma once

#include "labloom/plugin.hpp"
#include "labloom/workflow.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace labloom {

enum class Severity { error, warning };

struct ValidationIssue {
  Severity severity = Severity::error;
  std::string location;  // node, loop or binding id
  std::string message;

  bool operator==(const ValidationIssue&) const = default;
};

struct ValidationReport {
  bool ok = true;
  std::vector<ValidationIssue> issues;

  void error(std::string location, std::string message);
  void warning(std::string location, std::string message);
  std::size_t error_count() const;
  /// One line per issue: `error <location>: <message>`.
  std::string to_text() const;
  json to_json() const;
};

/// Resolved plugin surface of one node: its methods in call order and the
/// union of their ports.
struct NodeInterface {
  std::shared_ptr<Plugin> plugin;
  std::vector<const MethodSpec*> methods;
  /// Parameter lists the methods are called with (Output nodes without
  /// methods call the plugin's first method with defaults).
  std::vector<MethodCall> calls;
  std::map<std::string, PortSpec> inputs;
  std::map<std::string, PortSpec> outputs;
  /// Inputs an earlier method of the same node already produces.
  std::set<std::string> chained;
};

/// Throws Error(not_found) when the plugin is unknown, Error(schema) for an
/// unknown method or conflicting ports.
NodeInterface node_interface(const NodeSpec& node, const PluginRegistry& registry);

/// Label for a binding in reports: `target.port<-source`.
std::string binding_label(const DataBinding& binding);

ValidationReport validate(const WorkflowSpec& spec, const PluginRegistry& registry);

}  // namespace labloom
