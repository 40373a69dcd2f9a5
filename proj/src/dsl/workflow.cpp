#include "labloom/workflow.hpp"

#include "labloom/error.hpp"
#include "labloom/table.hpp"

#include <expat.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <set>
#include <tuple>

namespace labloom {

const std::string* MethodCall::find_param(std::string_view param) const {
  for (const auto& [name, value] : params) {
    if (name == param) return &value;
  }
  return nullptr;
}

bool LoopSpec::contains(std::string_view node) const {
  return std::find(body.begin(), body.end(), node) != body.end();
}

std::size_t LoopSpec::max_passes() const {
  if (const auto* m = std::get_if<MaxIterations>(&condition)) return m->n;
  return cap.value_or(kDefaultLoopCap);
}

const NodeSpec* WorkflowSpec::find_node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

NodeSpec* WorkflowSpec::find_node(std::string_view id) {
  for (auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const LoopSpec* WorkflowSpec::find_loop(std::string_view id) const {
  for (const auto& l : loops) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

std::size_t WorkflowSpec::node_index(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  return static_cast<std::size_t>(-1);
}

std::vector<const DataBinding*> WorkflowSpec::bindings_for(std::string_view node) const {
  std::vector<const DataBinding*> out;
  for (const auto& b : bindings) {
    if (b.target_node == node) out.push_back(&b);
  }
  return out;
}

std::string_view to_string(const LoopCondition& condition) {
  if (std::holds_alternative<MaxIterations>(condition)) return "max-iterations";
  if (std::holds_alternative<PredicatePort>(condition)) return "predicate-port";
  return "user-decision";
}

namespace {

// ---------------------------------------------------------------------------
// Raw element tree built by expat callbacks.

struct XmlElement {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::string text;
  std::size_t line = 0;
  std::size_t column = 0;
  std::vector<std::unique_ptr<XmlElement>> children;

  const std::string* attr(std::string_view key) const {
    for (const auto& [k, v] : attrs) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

struct TreeBuilder {
  XML_Parser parser = nullptr;
  std::unique_ptr<XmlElement> root;
  std::vector<XmlElement*> stack;
};

void XMLCALL on_start(void* data, const XML_Char* name, const XML_Char** attrs) {
  auto* b = static_cast<TreeBuilder*>(data);
  auto el = std::make_unique<XmlElement>();
  el->name = name;
  el->line = XML_GetCurrentLineNumber(b->parser);
  el->column = XML_GetCurrentColumnNumber(b->parser) + 1;
  for (int i = 0; attrs[i] != nullptr; i += 2) el->attrs.emplace_back(attrs[i], attrs[i + 1]);
  XmlElement* raw = el.get();
  if (b->stack.empty()) {
    b->root = std::move(el);
  } else {
    b->stack.back()->children.push_back(std::move(el));
  }
  b->stack.push_back(raw);
}

void XMLCALL on_end(void* data, const XML_Char*) {
  static_cast<TreeBuilder*>(data)->stack.pop_back();
}

void XMLCALL on_text(void* data, const XML_Char* s, int len) {
  auto* b = static_cast<TreeBuilder*>(data);
  if (!b->stack.empty()) b->stack.back()->text.append(s, static_cast<std::size_t>(len));
}

std::unique_ptr<XmlElement> parse_tree(std::string_view xml) {
  TreeBuilder builder;
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate("UTF-8"), &XML_ParserFree);
  builder.parser = parser.get();
  XML_SetUserData(parser.get(), &builder);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  XML_SetCharacterDataHandler(parser.get(), on_text);
  if (XML_Parse(parser.get(), xml.data(), static_cast<int>(xml.size()), XML_TRUE) == XML_STATUS_ERROR) {
    throw ParseError(XML_ErrorString(XML_GetErrorCode(parser.get())),
                     XML_GetCurrentLineNumber(parser.get()),
                     XML_GetCurrentColumnNumber(parser.get()) + 1);
  }
  if (!builder.root) throw ParseError("empty document", 1, 1);
  return std::move(builder.root);
}

// ---------------------------------------------------------------------------
// Grammar checks.

std::string where(const XmlElement& el) {
  return " (line " + std::to_string(el.line) + ", column " + std::to_string(el.column) + ")";
}

[[noreturn]] void schema_error(const XmlElement& el, const std::string& message) {
  throw Error(ErrorCode::schema, message + where(el));
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

void check_attrs(const XmlElement& el, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : el.attrs) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      schema_error(el, "unknown attribute '" + k + "' on <" + el.name + ">");
    }
  }
}

const std::string& require_attr(const XmlElement& el, std::string_view key) {
  const auto* v = el.attr(key);
  if (!v) schema_error(el, "<" + el.name + "> is missing attribute '" + std::string(key) + "'");
  return *v;
}

void forbid_text(const XmlElement& el) {
  if (!trim(el.text).empty()) schema_error(el, "unexpected text inside <" + el.name + ">");
}

void forbid_children(const XmlElement& el) {
  if (!el.children.empty()) {
    schema_error(*el.children.front(), "unknown element <" + el.children.front()->name + "> inside <" + el.name + ">");
  }
}

std::uint64_t parse_unsigned(const XmlElement& el, std::string_view key, const std::string& text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    schema_error(el, "attribute '" + std::string(key) + "' must be a non-negative integer, got '" + text + "'");
  }
  return v;
}

/// Ids end up in directory names and iteration vectors, so keep them plain.
void check_id(const XmlElement& el, const std::string& id, std::string_view what) {
  const bool ok = std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-';
  });
  if (!ok || id.front() == '_') {
    schema_error(el, std::string(what) + " id '" + id + "' must use letters, digits, '_' or '-' and not start with '_'");
  }
}

MethodCall parse_method(const XmlElement& el) {
  check_attrs(el, {"name"});
  forbid_text(el);
  MethodCall m;
  m.name = require_attr(el, "name");
  if (m.name.empty()) schema_error(el, "<method> name must be non-empty");
  for (const auto& child : el.children) {
    if (child->name != "param") schema_error(*child, "unknown element <" + child->name + "> inside <method>");
    check_attrs(*child, {"name"});
    forbid_children(*child);
    const auto& pname = require_attr(*child, "name");
    if (pname.empty()) schema_error(*child, "<param> name must be non-empty");
    if (m.find_param(pname)) schema_error(*child, "duplicate parameter '" + pname + "'");
    m.params.emplace_back(pname, trim(child->text));
  }
  return m;
}

DataBinding parse_input(const XmlElement& el, const std::string& node_id) {
  forbid_text(el);
  forbid_children(el);
  DataBinding b;
  b.target_node = node_id;
  b.target_port = require_attr(el, "port");
  if (b.target_port.empty()) schema_error(el, "<input> port must be non-empty");
  const bool from_node = el.attr("from-node") || el.attr("from-port");
  const bool folder = el.attr("folder") || el.attr("pattern") || el.attr("format");
  if (from_node == folder) {
    schema_error(el, "<input> needs exactly one of from-node/from-port or folder/pattern/format");
  }
  if (from_node) {
    check_attrs(el, {"port", "from-node", "from-port"});
    b.source = NodeOutput{require_attr(el, "from-node"), require_attr(el, "from-port")};
  } else {
    check_attrs(el, {"port", "folder", "pattern", "format"});
    const auto& fmt = require_attr(el, "format");
    auto parsed = parse_format(fmt);
    if (!parsed) schema_error(el, "format must be csv or json, got '" + fmt + "'");
    b.source = FolderSource{require_attr(el, "folder"), require_attr(el, "pattern"), *parsed};
  }
  return b;
}

void parse_node(const XmlElement& el, WorkflowSpec& spec) {
  check_attrs(el, {"id", "kind", "plugin"});
  forbid_text(el);
  NodeSpec node;
  node.id = require_attr(el, "id");
  if (node.id.empty()) throw Error(ErrorCode::structural, "node id must be non-empty" + where(el));
  check_id(el, node.id, "node");
  const auto& kind = require_attr(el, "kind");
  auto parsed = parse_module_kind(kind);
  if (!parsed) schema_error(el, "unknown module kind '" + kind + "'");
  node.kind = *parsed;
  node.plugin = require_attr(el, "plugin");
  for (const auto& child : el.children) {
    if (child->name == "method") {
      node.methods.push_back(parse_method(*child));
    } else if (child->name == "input") {
      spec.bindings.push_back(parse_input(*child, node.id));
    } else {
      schema_error(*child, "unknown element <" + child->name + "> inside <node>");
    }
  }
  if (spec.find_node(node.id)) {
    throw Error(ErrorCode::structural, "duplicate node id '" + node.id + "'" + where(el));
  }
  spec.nodes.push_back(std::move(node));
}

void parse_loop(const XmlElement& el, WorkflowSpec& spec) {
  forbid_text(el);
  LoopSpec loop;
  loop.id = require_attr(el, "id");
  if (loop.id.empty()) throw Error(ErrorCode::structural, "loop id must be non-empty" + where(el));
  check_id(el, loop.id, "loop");
  const auto& cond = require_attr(el, "condition");
  if (cond == "max-iterations") {
    check_attrs(el, {"id", "condition", "n"});
    const auto n = parse_unsigned(el, "n", require_attr(el, "n"));
    if (n < 1) schema_error(el, "max-iterations n must be at least 1");
    loop.condition = MaxIterations{n};
  } else if (cond == "predicate-port") {
    check_attrs(el, {"id", "condition", "node", "port", "n"});
    loop.condition = PredicatePort{require_attr(el, "node"), require_attr(el, "port")};
  } else if (cond == "user-decision") {
    check_attrs(el, {"id", "condition", "prompt", "default", "timeout-s", "n"});
    UserDecision d;
    d.prompt = require_attr(el, "prompt");
    const auto& def = require_attr(el, "default");
    if (def != "continue" && def != "stop") schema_error(el, "default must be continue or stop, got '" + def + "'");
    d.default_continue = def == "continue";
    const auto& t = require_attr(el, "timeout-s");
    double timeout = 0.0;
    try {
      timeout = parse_number(t);
    } catch (const Error&) {
      schema_error(el, "timeout-s must be a number, got '" + t + "'");
    }
    if (!(timeout >= 0.0) || !std::isfinite(timeout)) schema_error(el, "timeout-s must be finite and >= 0");
    d.timeout_s = timeout;
    loop.condition = d;
  } else {
    schema_error(el, "unknown loop condition '" + cond + "'");
  }
  if (!std::holds_alternative<MaxIterations>(loop.condition)) {
    if (const auto* n = el.attr("n")) {
      const auto cap = parse_unsigned(el, "n", *n);
      if (cap < 1) schema_error(el, "loop cap n must be at least 1");
      loop.cap = cap;
    }
  }
  for (const auto& child : el.children) {
    if (child->name != "body") schema_error(*child, "unknown element <" + child->name + "> inside <loop>");
    check_attrs(*child, {"node"});
    forbid_text(*child);
    forbid_children(*child);
    const auto& node = require_attr(*child, "node");
    if (loop.contains(node)) {
      throw Error(ErrorCode::structural, "loop '" + loop.id + "' lists node '" + node + "' twice" + where(*child));
    }
    loop.body.push_back(node);
  }
  if (loop.body.empty()) throw Error(ErrorCode::structural, "loop '" + loop.id + "' has an empty body" + where(el));
  if (spec.find_loop(loop.id)) throw Error(ErrorCode::structural, "duplicate loop id '" + loop.id + "'" + where(el));
  spec.loops.push_back(std::move(loop));
}

void check_references(const WorkflowSpec& spec) {
  for (const auto& l : spec.loops) {
    if (spec.find_node(l.id)) {
      throw Error(ErrorCode::structural, "loop id '" + l.id + "' collides with a node id");
    }
    for (const auto& n : l.body) {
      if (!spec.find_node(n)) {
        throw Error(ErrorCode::structural, "loop '" + l.id + "' references unknown node '" + n + "'");
      }
    }
    if (const auto* p = std::get_if<PredicatePort>(&l.condition); p && !spec.find_node(p->node)) {
      throw Error(ErrorCode::structural, "loop '" + l.id + "' predicate references unknown node '" + p->node + "'");
    }
  }
  for (const auto& b : spec.bindings) {
    if (const auto* src = b.node_source(); src && !spec.find_node(src->node)) {
      throw Error(ErrorCode::structural, "input '" + b.target_port + "' of node '" + b.target_node +
                                             "' references unknown node '" + src->node + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// Canonical output.

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string attr(std::string_view key, std::string_view value) {
  return " " + std::string(key) + "=\"" + escape(value) + "\"";
}

auto source_key(const DataBinding& b) {
  if (const auto* n = b.node_source()) {
    return std::make_tuple(0, n->node, n->port, std::string());
  }
  const auto* f = b.folder_source();
  return std::make_tuple(1, f->path, f->pattern, std::string(to_string(f->format)));
}

}  // namespace

WorkflowSpec parse_workflow(std::string_view xml_text) {
  const auto root = parse_tree(xml_text);
  if (root->name != "workflow") schema_error(*root, "unknown element <" + root->name + ">, expected <workflow>");
  check_attrs(*root, {"name", "version", "seed"});
  forbid_text(*root);
  WorkflowSpec spec;
  spec.name = require_attr(*root, "name");
  spec.version = require_attr(*root, "version");
  if (const auto* seed = root->attr("seed")) spec.seed = parse_unsigned(*root, "seed", *seed);
  for (const auto& child : root->children) {
    if (child->name == "node") {
      parse_node(*child, spec);
    } else if (child->name == "loop") {
      parse_loop(*child, spec);
    } else {
      schema_error(*child, "unknown element <" + child->name + "> inside <workflow>");
    }
  }
  check_references(spec);
  return spec;
}

WorkflowSpec normalize(WorkflowSpec spec) {
  for (auto& node : spec.nodes) {
    for (auto& m : node.methods) {
      std::stable_sort(m.params.begin(), m.params.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
    }
  }
  std::stable_sort(spec.bindings.begin(), spec.bindings.end(), [&](const DataBinding& a, const DataBinding& b) {
    const auto ia = spec.node_index(a.target_node);
    const auto ib = spec.node_index(b.target_node);
    return std::tie(ia, a.target_port) < std::tie(ib, b.target_port) ||
           (std::tie(ia, a.target_port) == std::tie(ib, b.target_port) && source_key(a) < source_key(b));
  });
  for (auto& loop : spec.loops) std::sort(loop.body.begin(), loop.body.end());
  return spec;
}

std::string serialize(const WorkflowSpec& input) {
  const WorkflowSpec spec = normalize(input);
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<workflow" + attr("name", spec.name) + attr("version", spec.version);
  if (spec.seed) out += attr("seed", std::to_string(*spec.seed));
  out += ">\n";
  for (const auto& node : spec.nodes) {
    out += "  <node" + attr("id", node.id) + attr("kind", to_string(node.kind)) + attr("plugin", node.plugin) + ">\n";
    for (const auto& m : node.methods) {
      if (m.params.empty()) {
        out += "    <method" + attr("name", m.name) + "/>\n";
        continue;
      }
      out += "    <method" + attr("name", m.name) + ">\n";
      for (const auto& [name, value] : m.params) {
        out += "      <param" + attr("name", name) + ">" + escape(value) + "</param>\n";
      }
      out += "    </method>\n";
    }
    for (const auto* b : spec.bindings_for(node.id)) {
      out += "    <input" + attr("port", b->target_port);
      if (const auto* n = b->node_source()) {
        out += attr("from-node", n->node) + attr("from-port", n->port);
      } else {
        const auto* f = b->folder_source();
        out += attr("folder", f->path) + attr("pattern", f->pattern) + attr("format", to_string(f->format));
      }
      out += "/>\n";
    }
    out += "  </node>\n";
  }
  for (const auto& loop : spec.loops) {
    out += "  <loop" + attr("id", loop.id) + attr("condition", to_string(loop.condition));
    if (const auto* m = std::get_if<MaxIterations>(&loop.condition)) {
      out += attr("n", std::to_string(m->n));
    } else if (const auto* p = std::get_if<PredicatePort>(&loop.condition)) {
      out += attr("node", p->node) + attr("port", p->port);
    } else {
      const auto& d = std::get<UserDecision>(loop.condition);
      out += attr("prompt", d.prompt) + attr("default", d.default_continue ? "continue" : "stop") +
             attr("timeout-s", format_number(d.timeout_s));
    }
    if (loop.cap) out += attr("n", std::to_string(*loop.cap));
    out += ">\n";
    for (const auto& n : loop.body) out += "    <body" + attr("node", n) + "/>\n";
    out += "  </loop>\n";
  }
  out += "</workflow>\n";
  return out;
}

}  // namespace labloom
