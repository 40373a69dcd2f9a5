#pragma once

#include "labloom/kinds.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace labloom {

struct MethodCall {
  std::string name;
  /// Raw parameter text in document order; typed against the plugin's MethodSpec.
  std::vector<std::pair<std::string, std::string>> params;

  const std::string* find_param(std::string_view param) const;

  bool operator==(const MethodCall&) const = default;
};

struct NodeSpec {
  std::string id;
  ModuleKind kind = ModuleKind::data_processing;
  std::string plugin;
  std::vector<MethodCall> methods;

  bool operator==(const NodeSpec&) const = default;
};

struct FolderSource {
  std::string path;
  std::string pattern;
  Format format = Format::csv;

  bool operator==(const FolderSource&) const = default;
};

struct NodeOutput {
  std::string node;
  std::string port;

  bool operator==(const NodeOutput&) const = default;
};

struct DataBinding {
  std::string target_node;
  std::string target_port;
  std::variant<FolderSource, NodeOutput> source;

  const NodeOutput* node_source() const { return std::get_if<NodeOutput>(&source); }
  const FolderSource* folder_source() const { return std::get_if<FolderSource>(&source); }

  bool operator==(const DataBinding&) const = default;
};

struct MaxIterations {
  std::size_t n = 1;
  bool operator==(const MaxIterations&) const = default;
};

/// Body repeats while the named boolean port of a body node is true.
struct PredicatePort {
  std::string node;
  std::string port;
  bool operator==(const PredicatePort&) const = default;
};

/// Body repeats until a human (or the timeout default) says stop.
struct UserDecision {
  std::string prompt;
  bool default_continue = true;
  double timeout_s = 0.0;
  bool operator==(const UserDecision&) const = default;
};

using LoopCondition = std::variant<MaxIterations, PredicatePort, UserDecision>;

/// Passes allowed for predicate-port and user-decision loops without an explicit `n`.
inline constexpr std::size_t kDefaultLoopCap = 1000;

struct LoopSpec {
  std::string id;
  std::vector<std::string> body;
  LoopCondition condition = MaxIterations{};
  /// Safety cap (`n` attribute) for predicate-port and user-decision loops.
  std::optional<std::size_t> cap;

  bool contains(std::string_view node) const;
  /// Upper bound on passes regardless of condition kind.
  std::size_t max_passes() const;

  bool operator==(const LoopSpec&) const = default;
};

struct WorkflowSpec {
  std::string name;
  std::string version;
  std::vector<NodeSpec> nodes;
  std::vector<DataBinding> bindings;
  std::vector<LoopSpec> loops;
  std::optional<std::uint64_t> seed;

  const NodeSpec* find_node(std::string_view id) const;
  NodeSpec* find_node(std::string_view id);
  const LoopSpec* find_loop(std::string_view id) const;
  /// Position of a node in document order; npos when absent.
  std::size_t node_index(std::string_view id) const;
  std::vector<const DataBinding*> bindings_for(std::string_view node) const;

  bool operator==(const WorkflowSpec&) const = default;
};

std::string_view to_string(const LoopCondition& condition);

/// Parses the XML workflow grammar. Throws ParseError for malformed XML,
/// Error(schema) for unknown elements/attributes or bad attribute values and
/// Error(structural) for duplicate ids or references to undeclared nodes.
WorkflowSpec parse_workflow(std::string_view xml_text);

/// Canonical ordering: parameters sorted by name, bindings sorted by target
/// node position then port then source, loop bodies sorted.
WorkflowSpec normalize(WorkflowSpec spec);

/// Canonical XML of normalize(spec) with two-space indentation.
std::string serialize(const WorkflowSpec& spec);

}  // namespace labloom
