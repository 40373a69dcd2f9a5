#include "labloom/plan.hpp"

#include "labloom/error.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace labloom {

namespace {

bool subset(const LoopSpec& inner, const LoopSpec& outer) {
  return std::all_of(inner.body.begin(), inner.body.end(), [&](const auto& n) { return outer.contains(n); });
}

/// Innermost-first list of loops containing the node.
std::vector<const LoopSpec*> containing(const WorkflowSpec& spec, std::string_view node) {
  std::vector<const LoopSpec*> out;
  for (const auto& l : spec.loops) {
    if (l.contains(node)) out.push_back(&l);
  }
  std::sort(out.begin(), out.end(), [](const LoopSpec* a, const LoopSpec* b) {
    return a->body.size() < b->body.size();
  });
  return out;
}

/// Directed graph over the items of one scope.
struct ScopeGraph {
  std::set<std::string> items;
  std::map<std::string, std::set<std::string>> edges;
};

/// Some cycle inside the remaining items, for the error message.
std::vector<std::string> find_cycle(const ScopeGraph& g, const std::set<std::string>& remaining) {
  std::map<std::string, int> state;  // 0 new, 1 on stack, 2 finished
  std::vector<std::string> stack;
  std::vector<std::string> cycle;
  std::function<bool(const std::string&)> dfs = [&](const std::string& u) {
    state[u] = 1;
    stack.push_back(u);
    auto it = g.edges.find(u);
    if (it != g.edges.end()) {
      for (const auto& v : it->second) {
        if (!remaining.count(v)) continue;
        if (state[v] == 1) {
          auto pos = std::find(stack.begin(), stack.end(), v);
          cycle.assign(pos, stack.end());
          cycle.push_back(v);
          return true;
        }
        if (state[v] == 0 && dfs(v)) return true;
      }
    }
    stack.pop_back();
    state[u] = 2;
    return false;
  };
  for (const auto& u : remaining) {
    if (state[u] == 0 && dfs(u)) break;
  }
  return cycle;
}

std::vector<std::string> topo_order(const ScopeGraph& g) {
  std::map<std::string, std::size_t> indegree;
  for (const auto& item : g.items) indegree[item] = 0;
  for (const auto& [u, vs] : g.edges) {
    for (const auto& v : vs) ++indegree[v];
  }
  std::set<std::string> ready;
  for (const auto& [item, d] : indegree) {
    if (d == 0) ready.insert(item);
  }
  std::vector<std::string> out;
  while (!ready.empty()) {
    const std::string u = *ready.begin();
    ready.erase(ready.begin());
    out.push_back(u);
    auto it = g.edges.find(u);
    if (it == g.edges.end()) continue;
    for (const auto& v : it->second) {
      if (--indegree[v] == 0) ready.insert(v);
    }
  }
  if (out.size() != g.items.size()) {
    std::set<std::string> remaining;
    for (const auto& [item, d] : indegree) {
      if (d > 0) remaining.insert(item);
    }
    const auto cycle = find_cycle(g, remaining);
    std::string text;
    for (const auto& c : cycle) text += (text.empty() ? "" : " -> ") + c;
    throw Error(ErrorCode::planning, "cycle outside declared loops: " + text);
  }
  return out;
}

}  // namespace

std::vector<std::string> ExecutionPlan::loop_chain(const std::string& loop) const {
  std::vector<std::string> chain;
  for (std::string l = loop; !l.empty(); l = parent.at(l)) chain.push_back(l);
  std::reverse(chain.begin(), chain.end());
  return chain;
}

std::size_t ExecutionPlan::begin_of(const std::string& loop) const {
  for (std::size_t i = 0; i < program.size(); ++i) {
    if (program[i].type == PlanItem::Type::loop_begin && program[i].id == loop) return i;
  }
  throw Error(ErrorCode::not_found, "loop '" + loop + "' is not in the plan");
}

std::string common_loop(const WorkflowSpec& spec, const NodeOutput& source, const std::string& target) {
  for (const auto* l : containing(spec, target)) {
    if (l->contains(source.node)) return l->id;
  }
  return {};
}

bool is_back_edge(const WorkflowSpec& spec, const DataBinding& binding) {
  const auto* src = binding.node_source();
  if (!src) return false;
  if (common_loop(spec, *src, binding.target_node).empty()) return false;
  return spec.node_index(src->node) >= spec.node_index(binding.target_node);
}

ExecutionPlan plan(const WorkflowSpec& spec) {
  ExecutionPlan p;

  // Loop nesting.
  for (std::size_t i = 0; i < spec.loops.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.loops.size(); ++j) {
      const auto& a = spec.loops[i];
      const auto& b = spec.loops[j];
      const bool ab = subset(a, b);
      const bool ba = subset(b, a);
      if (ab && ba) {
        throw Error(ErrorCode::planning, "loops '" + a.id + "' and '" + b.id + "' have identical bodies");
      }
      const bool shared = std::any_of(a.body.begin(), a.body.end(), [&](const auto& n) { return b.contains(n); });
      if (shared && !ab && !ba) {
        throw Error(ErrorCode::planning, "partially overlapping loops '" + a.id + "' and '" + b.id + "'");
      }
    }
  }
  for (const auto& l : spec.loops) {
    const LoopSpec* best = nullptr;
    for (const auto& other : spec.loops) {
      if (&other == &l || !subset(l, other)) continue;
      if (!best || other.body.size() < best->body.size()) best = &other;
    }
    p.parent[l.id] = best ? best->id : std::string();
  }
  for (const auto& n : spec.nodes) {
    auto chain = containing(spec, n.id);
    std::vector<std::string> ids;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) ids.push_back((*it)->id);
    p.loops_of[n.id] = std::move(ids);
  }

  // Scope graphs: "" is the top level.
  std::map<std::string, ScopeGraph> scopes;
  scopes[""];
  for (const auto& l : spec.loops) {
    scopes[l.id];
    scopes[p.parent[l.id]].items.insert(l.id);
  }
  for (const auto& n : spec.nodes) {
    const auto& chain = p.loops_of[n.id];
    scopes[chain.empty() ? std::string() : chain.back()].items.insert(n.id);
  }

  for (const auto& b : spec.bindings) {
    const auto* src = b.node_source();
    if (!src) continue;
    if (is_back_edge(spec, b)) continue;
    if (src->node == b.target_node) {
      throw Error(ErrorCode::planning, "cycle outside declared loops: " + src->node + " -> " + src->node);
    }
    const auto& cs = p.loops_of[src->node];
    const auto& ct = p.loops_of[b.target_node];
    std::size_t k = 0;
    while (k < cs.size() && k < ct.size() && cs[k] == ct[k]) ++k;
    const std::string scope = k == 0 ? std::string() : cs[k - 1];
    const std::string from = k < cs.size() ? cs[k] : src->node;
    const std::string to = k < ct.size() ? ct[k] : b.target_node;
    scopes[scope].edges[from].insert(to);
  }

  std::map<std::string, std::vector<std::string>> ordered;
  for (const auto& [scope, graph] : scopes) ordered[scope] = topo_order(graph);

  std::function<void(const std::string&)> emit = [&](const std::string& scope) {
    for (const auto& item : ordered[scope]) {
      if (scopes.count(item) && spec.find_loop(item)) {
        const std::size_t begin = p.program.size();
        p.program.push_back({PlanItem::Type::loop_begin, item, 0});
        emit(item);
        p.program[begin].match = p.program.size();
        p.program.push_back({PlanItem::Type::loop_end, item, begin});
      } else {
        p.program.push_back({PlanItem::Type::node, item, 0});
        p.order.push_back(item);
      }
    }
  };
  emit("");

  for (const auto& l : spec.loops) {
    const auto begin = p.begin_of(l.id);
    const auto end = p.program[begin].match;
    std::string last;
    std::string last_ui;
    for (std::size_t i = begin + 1; i < end; ++i) {
      if (p.program[i].type != PlanItem::Type::node) continue;
      last = p.program[i].id;
      if (spec.find_node(last)->kind == ModuleKind::user_interaction) last_ui = last;
    }
    p.last_node[l.id] = last;
    if (std::holds_alternative<UserDecision>(l.condition)) p.anchor[l.id] = last_ui.empty() ? last : last_ui;
  }
  return p;
}

}  // namespace labloom
