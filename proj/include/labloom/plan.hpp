#pragma once

#include "labloom/workflow.hpp"

#include <map>
#include <string>
#include <vector>

namespace labloom {

struct PlanItem {
  enum class Type { node, loop_begin, loop_end };
  Type type = Type::node;
  std::string id;  // node id or loop id
  /// For loop markers: position of the matching begin/end in the program.
  std::size_t match = 0;

  bool operator==(const PlanItem&) const = default;
};

/// Flattened execution order of a workflow.
///
/// Each loop body is scheduled as one collapsed super-node in its parent
/// scope; inside a body the members are ordered topologically with ties
/// broken by id.
struct ExecutionPlan {
  std::vector<PlanItem> program;
  /// Node ids in program order.
  std::vector<std::string> order;
  /// Enclosing loops of each node, outermost first.
  std::map<std::string, std::vector<std::string>> loops_of;
  /// Parent loop of each loop; empty for top-level loops.
  std::map<std::string, std::string> parent;
  /// Node that waits for a user-decision loop's verdict.
  std::map<std::string, std::string> anchor;
  /// Last body node of each loop in program order.
  std::map<std::string, std::string> last_node;

  /// Enclosing loops of a loop, outermost first, the loop itself included.
  std::vector<std::string> loop_chain(const std::string& loop) const;
  std::size_t begin_of(const std::string& loop) const;
};

/// The innermost loop holding both ends of a binding, if any.
std::string common_loop(const WorkflowSpec& spec, const NodeOutput& source, const std::string& target);

/// A back-edge feeds a node from the same or a later node (document order)
/// of a loop that contains both; on the first pass it resolves to nothing.
bool is_back_edge(const WorkflowSpec& spec, const DataBinding& binding);

/// Throws Error(planning) for dependency cycles outside loop back-edges and
/// for loops that overlap partially or share an identical body.
ExecutionPlan plan(const WorkflowSpec& spec);

}  // namespace labloom
