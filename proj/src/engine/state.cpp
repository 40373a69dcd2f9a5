#include "labloom/engine.hpp"

#include "labloom/error.hpp"
#include "labloom/hash.hpp"

#include <cstdio>
#include <cstdlib>

namespace labloom {

std::string_view to_string(NodeStatus status) {
  switch (status) {
    case NodeStatus::pending: return "pending";
    case NodeStatus::running: return "running";
    case NodeStatus::awaiting_interaction: return "awaiting-interaction";
    case NodeStatus::done: return "done";
    case NodeStatus::failed: return "failed";
    case NodeStatus::skipped: return "skipped";
  }
  return "?";
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::running: return "running";
    case Phase::paused: return "paused";
    case Phase::completed: return "completed";
    case Phase::failed: return "failed";
  }
  return "?";
}

namespace {

NodeStatus parse_status(const std::string& s) {
  for (auto v : {NodeStatus::pending, NodeStatus::running, NodeStatus::awaiting_interaction, NodeStatus::done,
                 NodeStatus::failed, NodeStatus::skipped}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::integrity, "unknown node status '" + s + "'");
}

Phase parse_phase(const std::string& s) {
  for (auto v : {Phase::running, Phase::paused, Phase::completed, Phase::failed}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::integrity, "unknown run phase '" + s + "'");
}

json status_map(const std::map<std::string, NodeStatus>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = std::string(to_string(v));
  return j;
}

json request_list(const std::vector<InteractionRequest>& requests) {
  json j = json::array();
  for (const auto& r : requests) j.push_back(r.to_json());
  return j;
}

json patch_list(const std::vector<ConfigPatch>& patches) {
  json j = json::array();
  for (const auto& p : patches) j.push_back(p.to_json());
  return j;
}

}  // namespace

json InteractionRequest::to_json() const {
  json j = {{"request_id", request_id}, {"node_id", node_id},     {"kind", kind},
            {"prompt", prompt},         {"payload", payload},     {"default_action", default_action},
            {"timeout_s", timeout_s},   {"created_at", created_at}, {"iteration", iteration.render()}};
  if (!loop_id.empty()) j["loop_id"] = loop_id;
  if (!answer_port.empty()) j["answer_port"] = answer_port;
  return j;
}

InteractionRequest InteractionRequest::from_json(const json& j) {
  InteractionRequest r;
  r.request_id = j.at("request_id").get<std::string>();
  r.node_id = j.at("node_id").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.prompt = j.value("prompt", std::string());
  r.payload = j.at("payload").get<std::vector<std::string>>();
  r.default_action = j.at("default_action");
  r.timeout_s = j.at("timeout_s").get<double>();
  r.created_at = j.at("created_at").get<std::string>();
  r.iteration = IterationVector::parse(j.at("iteration").get<std::string>());
  r.loop_id = j.value("loop_id", std::string());
  r.answer_port = j.value("answer_port", std::string());
  return r;
}

json ConfigPatch::to_json() const {
  return {{"node_id", node_id},
          {"param_path", param_path},
          {"new_value", new_value},
          {"applied_at_iteration", applied_at_iteration.render()}};
}

ConfigPatch ConfigPatch::from_json(const json& j) {
  try {
    ConfigPatch p;
    p.node_id = j.at("node_id").get<std::string>();
    p.param_path = j.at("param_path").get<std::string>();
    p.new_value = j.at("new_value");
    if (j.contains("applied_at_iteration")) {
      p.applied_at_iteration = IterationVector::parse(j.at("applied_at_iteration").get<std::string>());
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema, std::string("malformed config patch: ") + e.what());
  }
}

json EngineEvent::to_json() const {
  json j = {{"index", index}, {"type", type}, {"run_id", run_id}, {"detail", detail}, {"at", at}};
  if (!node_id.empty()) j["node_id"] = node_id;
  if (!node_id.empty() || !iteration.empty()) j["iteration"] = iteration.render();
  return j;
}

EngineEvent EngineEvent::from_json(const json& j) {
  EngineEvent e;
  e.index = j.at("index").get<std::size_t>();
  e.type = j.at("type").get<std::string>();
  e.run_id = j.at("run_id").get<std::string>();
  e.node_id = j.value("node_id", std::string());
  e.iteration = IterationVector::parse(j.value("iteration", std::string("root")));
  e.detail = j.value("detail", json::object());
  e.at = j.value("at", std::string());
  return e;
}

json RunState::to_json() const {
  json iter = json::object();
  for (const auto& [k, v] : iteration) iter[k] = v;
  return {{"run_id", run_id},
          {"spec", serialize(spec)},
          {"node_status", status_map(node_status)},
          {"iteration", iter},
          {"rng_state", {{"seed", rng_seed}}},
          {"phase", std::string(to_string(phase))},
          {"pending_interactions", request_list(pending_interactions)},
          {"patch_log", patch_list(patch_log)},
          {"pc", pc},
          {"resolved_interactions", resolved_interactions},
          {"next_request", next_request},
          {"event_count", event_count},
          {"base_dir", base_dir},
          {"default_timeout_s", default_timeout_s},
          {"failure", failure}};
}

RunState RunState::from_json(const json& j) {
  try {
    RunState s;
    s.run_id = j.at("run_id").get<std::string>();
    s.spec = parse_workflow(j.at("spec").get<std::string>());
    for (const auto& [k, v] : j.at("node_status").items()) s.node_status[k] = parse_status(v.get<std::string>());
    for (const auto& [k, v] : j.at("iteration").items()) s.iteration[k] = v.get<std::size_t>();
    s.rng_seed = j.at("rng_state").at("seed").get<std::uint64_t>();
    s.phase = parse_phase(j.at("phase").get<std::string>());
    for (const auto& r : j.at("pending_interactions")) s.pending_interactions.push_back(InteractionRequest::from_json(r));
    for (const auto& p : j.at("patch_log")) s.patch_log.push_back(ConfigPatch::from_json(p));
    s.pc = j.at("pc").get<std::size_t>();
    s.resolved_interactions = j.at("resolved_interactions").get<std::map<std::string, std::string>>();
    s.next_request = j.at("next_request").get<std::size_t>();
    s.event_count = j.at("event_count").get<std::size_t>();
    s.base_dir = j.at("base_dir").get<std::string>();
    s.default_timeout_s = j.at("default_timeout_s").get<double>();
    s.failure = j.value("failure", std::string());
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::integrity, std::string("malformed run state: ") + e.what());
  }
}

std::string Checkpoint::compute_hash() const {
  const json body = {{"run_state", run_state.to_json()}, {"artifact_index", artifact_index}};
  return sha256_hex(body.dump());
}

json Checkpoint::to_json() const {
  return {{"index", index},
          {"run_state", run_state.to_json()},
          {"artifact_index", artifact_index},
          {"content_hash", content_hash}};
}

Checkpoint Checkpoint::from_json(const json& j) {
  Checkpoint c;
  try {
    c.index = j.at("index").get<std::size_t>();
    c.artifact_index = j.at("artifact_index").get<std::vector<std::string>>();
    c.content_hash = j.at("content_hash").get<std::string>();
    // Hash the stored run_state verbatim so that any edit is detected.
    const json body = {{"run_state", j.at("run_state")}, {"artifact_index", j.at("artifact_index")}};
    if (sha256_hex(body.dump()) != c.content_hash) {
      throw Error(ErrorCode::integrity, "checkpoint content hash does not verify");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::integrity, std::string("malformed checkpoint: ") + e.what());
  }
  c.run_state = RunState::from_json(j.at("run_state"));
  return c;
}

json RunSnapshot::to_json() const {
  json iter = json::object();
  for (const auto& [k, v] : iteration) iter[k] = v;
  return {{"run_id", run_id},
          {"workflow", workflow},
          {"phase", std::string(to_string(phase))},
          {"node_status", status_map(node_status)},
          {"iteration", iter},
          {"pending_interactions", request_list(pending_interactions)},
          {"patch_log", patch_list(patch_log)},
          {"event_count", event_count},
          {"checkpoints", checkpoints},
          {"failure", failure}};
}

std::filesystem::path default_runs_root() {
  if (const char* env = std::getenv("LABLOOM_RUNS_DIR"); env && *env) return env;
  return "runs";
}

std::string rng_key(std::uint64_t seed, const std::string& node, const IterationVector& iteration) {
  std::string material = std::to_string(seed);
  material.push_back('\0');
  material += node;
  material.push_back('\0');
  material += iteration.render();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(sha256_u64(material)));
  return buf;
}

}  // namespace labloom
