#include "labloom/engine.hpp"

#include "labloom/error.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace labloom {

namespace fs = std::filesystem;

struct Engine::Run {
  mutable std::mutex mu;
  std::condition_variable cv;  // state changes, watched by the driver
  RunState state;
  ExecutionPlan plan;
  std::map<std::string, NodeInterface> interfaces;
  std::unique_ptr<ArtifactStore> store;
  fs::path dir;
  std::size_t checkpoint_count = 0;
  std::optional<Checkpoint> pause_checkpoint;
  std::map<std::string, std::chrono::system_clock::time_point> deadlines;
  bool stopping = false;
  bool driven = false;  // a drive() loop owns this run

  mutable std::mutex events_mu;
  mutable std::condition_variable events_cv;
  std::vector<EngineEvent> events;
  bool finished = false;

  mutable std::mutex snapshot_mu;
  std::shared_ptr<const RunSnapshot> snapshot;
};

namespace {

using Clock = std::chrono::system_clock;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::integrity, "cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + tmp.string());
    out << bytes;
    if (!out) throw Error(ErrorCode::io, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Checkpoint files sorted by index.
std::vector<fs::path> checkpoint_files(const fs::path& dir) {
  std::vector<std::pair<std::size_t, fs::path>> found;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir / "checkpoints", ec)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() != ".json") continue;
    const auto stem = entry.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    found.emplace_back(std::stoull(stem), entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [k, p] : found) out.push_back(std::move(p));
  return out;
}

std::string generate_run_id(Clock::time_point now) {
  const auto t = Clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  std::random_device rd;
  char suffix[9];
  std::snprintf(suffix, sizeof(suffix), "%08x", static_cast<unsigned>(rd()));
  return std::string(stamp) + "-" + suffix;
}

void check_run_id(const std::string& id) {
  const bool ok = !id.empty() && id.size() <= 128 && id != "." && id != ".." &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
                  });
  if (!ok) throw Error(ErrorCode::schema, "invalid run id '" + id + "'");
}

/// Command context: everything below assumes run.mu is held.
class Executor {
 public:
  Executor(Engine::Run& run, const EngineOptions& options) : run_(run), options_(options) {}

  RunState& st() { return run_.state; }
  Clock::time_point now() const { return options_.clock(); }

  EngineEvent& emit(std::vector<EngineEvent>& out, std::string type, std::string node, IterationVector iteration,
                    json detail = json::object()) {
    EngineEvent e;
    e.index = ++st().event_count;
    e.type = std::move(type);
    e.run_id = st().run_id;
    e.node_id = std::move(node);
    e.iteration = std::move(iteration);
    e.detail = std::move(detail);
    e.at = format_timestamp(now());
    {
      std::ofstream log(run_.dir / "events.jsonl", std::ios::app);
      log << e.to_json().dump() << '\n';
    }
    {
      std::lock_guard lk(run_.events_mu);
      run_.events.push_back(e);
      if (st().phase == Phase::completed || st().phase == Phase::failed) run_.finished = true;
    }
    run_.events_cv.notify_all();
    out.push_back(e);
    return out.back();
  }

  Checkpoint write_checkpoint() {
    Checkpoint c;
    c.index = run_.checkpoint_count;
    c.run_state = st();
    for (const auto& r : run_.store->records()) c.artifact_index.push_back(r.artifact_id);
    c.content_hash = c.compute_hash();
    fs::create_directories(run_.dir / "checkpoints");
    write_atomic(run_.dir / "checkpoints" / (std::to_string(c.index) + ".json"), c.to_json().dump(2));
    ++run_.checkpoint_count;
    return c;
  }

  void publish() {
    auto snap = std::make_shared<RunSnapshot>();
    snap->run_id = st().run_id;
    snap->workflow = st().spec.name;
    snap->phase = st().phase;
    snap->node_status = st().node_status;
    snap->iteration = st().iteration;
    snap->pending_interactions = st().pending_interactions;
    snap->patch_log = st().patch_log;
    snap->event_count = st().event_count;
    snap->checkpoints = run_.checkpoint_count;
    snap->failure = st().failure;
    std::lock_guard lk(run_.snapshot_mu);
    run_.snapshot = std::move(snap);
  }

  IterationVector loop_vector(const std::string& loop) const {
    IterationVector v;
    for (const auto& l : run_.plan.loop_chain(loop)) v.entries.emplace_back(l, run_.state.iteration.at(l));
    return v;
  }

  /// Iteration vector of a node from the loops currently active.
  IterationVector node_vector(const std::string& node) const {
    IterationVector v;
    for (const auto& l : run_.plan.loops_of.at(node)) {
      auto it = run_.state.iteration.find(l);
      if (it != run_.state.iteration.end()) v.entries.emplace_back(l, it->second);
    }
    return v;
  }

  std::vector<EngineEvent> step() {
    std::vector<EngineEvent> out;
    if (st().phase != Phase::running) {
      throw Error(ErrorCode::conflict, "run '" + st().run_id + "' is " + std::string(to_string(st().phase)));
    }
    if (!st().pending_interactions.empty()) return out;
    if (!advance(out)) return out;
    const auto& item = run_.plan.program[st().pc];
    execute_node(item.id, out);
    if (st().node_status[item.id] != NodeStatus::done) return out;
    ++st().pc;
    advance(out);
    return out;
  }

  /// Processes loop markers and answered nodes at the cursor. Returns true
  /// when the cursor rests on a node ready to execute.
  bool advance(std::vector<EngineEvent>& out) {
    const auto& program = run_.plan.program;
    while (st().phase == Phase::running && st().pc < program.size()) {
      const auto& item = program[st().pc];
      switch (item.type) {
        case PlanItem::Type::node: {
          const auto status = st().node_status[item.id];
          if (status == NodeStatus::done) {
            ++st().pc;
            continue;
          }
          if (status == NodeStatus::awaiting_interaction) return false;
          return true;
        }
        case PlanItem::Type::loop_begin:
          st().iteration[item.id] = 0;
          reset_body(item.id);
          ++st().pc;
          continue;
        case PlanItem::Type::loop_end: {
          const auto verdict = loop_verdict(item.id, out);
          if (!verdict) return false;
          const auto vec = loop_vector(item.id);
          emit(out, "loop-iterated", "", vec,
               {{"loop_id", item.id}, {"index", st().iteration[item.id]}, {"continue", *verdict}});
          if (*verdict) {
            ++st().iteration[item.id];
            reset_body(item.id);
            st().pc = item.match + 1;
          } else {
            st().iteration.erase(item.id);
            ++st().pc;
          }
          continue;
        }
      }
    }
    if (st().phase == Phase::running && st().pc >= program.size()) {
      st().phase = Phase::completed;
      emit(out, "run-completed", "", {}, {{"artifacts", run_.store->size()}});
      write_checkpoint();
    }
    return false;
  }

  void reset_body(const std::string& loop) {
    const auto* spec = st().spec.find_loop(loop);
    for (const auto& n : spec->body) st().node_status[n] = NodeStatus::pending;
  }

  /// Whether the loop runs another pass; nullopt while waiting for a human.
  std::optional<bool> loop_verdict(const std::string& loop, std::vector<EngineEvent>& out) {
    const auto* spec = st().spec.find_loop(loop);
    const std::size_t passes = st().iteration[loop] + 1;
    const bool below_cap = passes < spec->max_passes();
    if (const auto* m = std::get_if<MaxIterations>(&spec->condition)) return passes < m->n;
    if (const auto* p = std::get_if<PredicatePort>(&spec->condition)) {
      const auto rec = run_.store->latest(p->node, p->port);
      if (!rec) throw Error(ErrorCode::resolution, "predicate port " + p->node + "." + p->port + " has no value");
      return below_cap && run_.store->load(*rec).value().get<bool>();
    }
    const auto& ud = std::get<UserDecision>(spec->condition);
    if (!below_cap) return false;
    const auto vec = loop_vector(loop);
    if (const auto rec = run_.store->get(loop, "decision", vec)) {
      return run_.store->load(*rec).value() == json("continue");
    }
    for (const auto& r : st().pending_interactions) {
      if (r.loop_id == loop) return std::nullopt;
    }
    const auto& anchor = run_.plan.anchor.at(loop);
    InteractionRequest r;
    r.node_id = anchor;
    r.kind = std::string(kTerminateDecision);
    r.prompt = ud.prompt.empty() ? "Run another pass of '" + loop + "'?" : ud.prompt;
    for (const auto& [port, _] : run_.interfaces.at(anchor).outputs) {
      if (auto rec = run_.store->get(anchor, port, node_vector(anchor))) r.payload.push_back(rec->artifact_id);
    }
    r.default_action = ud.default_continue ? "continue" : "stop";
    r.timeout_s = ud.timeout_s;
    r.loop_id = loop;
    r.iteration = vec;
    raise(std::move(r), out);
    return std::nullopt;
  }

  void raise(InteractionRequest r, std::vector<EngineEvent>& out) {
    r.request_id = "req-" + std::to_string(st().next_request++);
    const auto created = now();
    r.created_at = format_timestamp(created);
    run_.deadlines[r.request_id] =
        created + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(r.timeout_s));
    st().node_status[r.node_id] = NodeStatus::awaiting_interaction;
    emit(out, "interaction-raised", r.node_id, r.iteration, r.to_json());
    st().pending_interactions.push_back(std::move(r));
    if (options_.pause_on_interaction) pause(out);
  }

  Checkpoint pause(std::vector<EngineEvent>& out) {
    if (st().phase == Phase::paused && run_.pause_checkpoint) return *run_.pause_checkpoint;
    if (st().phase != Phase::running) {
      throw Error(ErrorCode::conflict, "run '" + st().run_id + "' is " + std::string(to_string(st().phase)));
    }
    st().phase = Phase::paused;
    emit(out, "run-paused", "", {}, {{"pc", st().pc}});
    run_.pause_checkpoint = write_checkpoint();
    return *run_.pause_checkpoint;
  }

  /// Resolved parameters of one method call with the patch log applied.
  json method_params(const std::string& node, std::size_t k, std::vector<std::string>& patch_ids) {
    const auto& ni = run_.interfaces.at(node);
    const auto& method = *ni.methods[k];
    json params = resolve_params(method, ni.calls[k].params);
    for (std::size_t i = 0; i < st().patch_log.size(); ++i) {
      const auto& p = st().patch_log[i];
      if (p.node_id != node) continue;
      const auto dot = p.param_path.find('.');
      if (p.param_path.substr(0, dot) != method.name) continue;
      const auto name = p.param_path.substr(dot + 1);
      params[name] = coerce_param(*method.find_param(name), p.new_value);
      if (auto rec = run_.store->get(node, "_patch" + std::to_string(i), p.applied_at_iteration)) {
        patch_ids.push_back(rec->artifact_id);
      }
    }
    return params;
  }

  void execute_node(const std::string& node, std::vector<EngineEvent>& out) {
    const auto& ni = run_.interfaces.at(node);
    const auto iter = node_vector(node);
    st().node_status[node] = NodeStatus::running;
    emit(out, "node-started", node, iter);
    std::vector<std::string> stored;
    try {
      std::map<std::string, std::vector<ArtifactValue>> bound;
      std::vector<std::string> parents;
      for (const auto* b : st().spec.bindings_for(node)) {
        if (const auto* src = b->node_source()) {
          const auto rec = run_.store->latest(src->node, src->port);
          if (!rec) {
            if (is_back_edge(st().spec, *b)) continue;
            throw Error(ErrorCode::resolution, "source not done: " + src->node + "." + src->port);
          }
          bound[b->target_port].push_back(run_.store->load(*rec));
          parents.push_back(rec->artifact_id);
        } else {
          const auto& f = *b->folder_source();
          const DataKind kind = f.format == Format::csv ? DataKind::table : DataKind::document;
          for (const auto& file : read_folder(st().base_dir, f)) {
            const std::string port = folder_port(f, file.stem);
            auto rec = run_.store->get(std::string(kFolderNode), port, {});
            if (!rec) rec = run_.store->put(std::string(kFolderNode), port, {}, kind, file.bytes, {});
            bound[b->target_port].push_back(run_.store->load(*rec));
            parents.push_back(rec->artifact_id);
          }
        }
      }

      std::map<std::string, ArtifactValue> produced;
      std::map<std::string, std::string> output_ids;
      json diagnostics = json::object();
      for (std::size_t k = 0; k < ni.methods.size(); ++k) {
        const auto& method = *ni.methods[k];
        std::vector<std::string> method_parents = parents;
        InvokeRequest req;
        req.plugin = ni.plugin->descriptor().name;
        req.method = method.name;
        req.params = method_params(node, k, method_parents);
        for (const auto& port : method.input_ports) {
          if (auto it = bound.find(port.name); it != bound.end()) {
            req.inputs[port.name] = it->second;
          } else if (auto p = produced.find(port.name); p != produced.end()) {
            req.inputs[port.name] = {p->second};
            method_parents.push_back(p->second.id);
          }
        }
        req.rng_key = rng_key(st().rng_seed, node, iter);
        req.iteration = iter;
        req.base_dir = st().base_dir;
        check_request(method, req);
        auto result = invoke_checked(*ni.plugin, method, req);
        if (!result.ok()) throw Error(ErrorCode::plugin, result.message);

        std::optional<Responder> responder;
        if (auto it = result.diagnostics.find("responder"); it != result.diagnostics.end() && it->second.is_string()) {
          responder = parse_responder(it->second.get<std::string>());
        }
        std::vector<std::string> unique_parents;
        for (const auto& id : method_parents) {
          if (std::find(unique_parents.begin(), unique_parents.end(), id) == unique_parents.end()) {
            unique_parents.push_back(id);
          }
        }
        for (auto& [port, value] : result.outputs) {
          const auto rec = run_.store->put(node, port, iter, value.kind, value.bytes, unique_parents, responder);
          value = run_.store->load(rec);
          stored.push_back(rec.artifact_id);
          output_ids[port] = rec.artifact_id;
          produced[port] = value;
        }
        for (const auto& [key, v] : result.diagnostics) diagnostics[key] = v;

        if (result.interaction) {
          if (k + 1 != ni.methods.size()) {
            throw Error(ErrorCode::plugin, "only the last method of a node may request an interaction");
          }
          const auto& spec = *result.interaction;
          InteractionRequest r;
          r.node_id = node;
          r.kind = spec.kind;
          r.prompt = spec.prompt;
          for (const auto& port : spec.payload_ports) {
            auto it = output_ids.find(port);
            if (it == output_ids.end()) {
              throw Error(ErrorCode::plugin, "interaction payload port '" + port + "' was not produced");
            }
            r.payload.push_back(it->second);
          }
          r.answer_port = spec.answer_port;
          r.timeout_s = spec.timeout_s.value_or(st().default_timeout_s);
          r.iteration = iter;
          if (!ni.outputs.count(r.answer_port) || output_ids.count(r.answer_port)) {
            throw Error(ErrorCode::plugin, "interaction answer port '" + r.answer_port + "' is not a free output");
          }
          if (r.kind != kApproveSuggestions && r.kind != kEditConfig && r.kind != kLabelItem) {
            throw Error(ErrorCode::plugin, "unsupported interaction kind '" + r.kind + "'");
          }
          r.default_action = spec.default_action;
          materialize(r, r.default_action);  // the default must itself be a valid answer
          emit(out, "node-finished", node, iter,
               {{"outputs", output_ids}, {"diagnostics", diagnostics}, {"awaiting", true}});
          raise(std::move(r), out);
          return;
        }
      }
      st().node_status[node] = NodeStatus::done;
      emit(out, "node-finished", node, iter, {{"outputs", output_ids}, {"diagnostics", diagnostics}});
    } catch (const std::exception& e) {
      st().node_status[node] = NodeStatus::failed;
      st().phase = Phase::failed;
      st().failure = node + ": " + e.what();
      emit(out, "node-failed", node, iter, {{"message", e.what()}, {"partial", stored}});
      write_checkpoint();
    }
  }

  /// Typed answer artifact for a request; throws Error(schema) when ill-typed.
  ArtifactValue materialize(const InteractionRequest& r, const json& answer) {
    if (r.kind == kTerminateDecision) {
      if (answer != json("continue") && answer != json("stop")) {
        throw Error(ErrorCode::schema, "terminate-decision answer must be \"continue\" or \"stop\"");
      }
      return ArtifactValue::of_json(DataKind::decision, answer);
    }
    if (r.kind == kLabelItem) {
      if (!answer.is_number() || (answer != json(0) && answer != json(1))) {
        throw Error(ErrorCode::schema, "label-item answer must be 0 or 1, got " + answer.dump());
      }
      return ArtifactValue::of_json(DataKind::label, answer.get<double>() != 0.0 ? 1 : 0);
    }
    if (r.kind == kApproveSuggestions) {
      if (r.payload.empty()) throw Error(ErrorCode::schema, "approve-suggestions request has no payload");
      const auto rec = run_.store->find(r.payload.front());
      const Table table = run_.store->load(rec).table();
      if (answer.is_null()) return ArtifactValue::of_table(rec.kind, table);
      if (!answer.is_object()) throw Error(ErrorCode::schema, "approve-suggestions answer must be an object");
      Table result(table.columns());
      if (answer.contains("accepted")) {
        const auto& acc = answer.at("accepted");
        if (!acc.is_array()) throw Error(ErrorCode::schema, "'accepted' must be a list of row indices");
        std::set<std::size_t> rows;
        for (const auto& v : acc) {
          if (!v.is_number_integer() || v.get<long long>() < 0 ||
              static_cast<std::size_t>(v.get<long long>()) >= table.rows()) {
            throw Error(ErrorCode::schema, "accepted row index out of range: " + v.dump());
          }
          rows.insert(v.get<std::size_t>());
        }
        for (auto i : rows) {
          std::vector<std::string> row;
          for (std::size_t c = 0; c < table.cols(); ++c) row.push_back(table.cell(i, c));
          result.add_row(std::move(row));
        }
      } else if (answer.contains("rows")) {
        const auto& rows = answer.at("rows");
        if (!rows.is_array()) throw Error(ErrorCode::schema, "'rows' must be a list of rows");
        for (const auto& row : rows) {
          if (!row.is_array() || row.size() != table.cols()) {
            throw Error(ErrorCode::schema, "edited row must have " + std::to_string(table.cols()) + " numbers");
          }
          std::vector<double> values;
          for (const auto& v : row) {
            if (!v.is_number()) throw Error(ErrorCode::schema, "edited row values must be numbers");
            values.push_back(v.get<double>());
          }
          result.add_numeric_row(values);
        }
      } else {
        throw Error(ErrorCode::schema, "approve-suggestions answer needs 'accepted' or 'rows'");
      }
      if (result.rows() == 0) throw Error(ErrorCode::schema, "approve-suggestions answer keeps no rows");
      return ArtifactValue::of_table(rec.kind, result);
    }
    if (r.kind == kEditConfig) {
      if (answer.is_null()) return ArtifactValue::of_json(DataKind::decision, json{{"patch", nullptr}});
      auto patch = ConfigPatch::from_json(answer);
      check_patch(patch);
      return ArtifactValue::of_json(DataKind::decision, json{{"patch", patch.to_json()}});
    }
    throw Error(ErrorCode::schema, "unsupported interaction kind '" + r.kind + "'");
  }

  /// Validates node and parameter path and coerces the value in place.
  void check_patch(ConfigPatch& patch) {
    const auto it = run_.interfaces.find(patch.node_id);
    if (it == run_.interfaces.end()) throw Error(ErrorCode::not_found, "no node '" + patch.node_id + "'");
    const auto dot = patch.param_path.find('.');
    if (dot == std::string::npos) {
      throw Error(ErrorCode::schema, "parameter path must be method.param, got '" + patch.param_path + "'");
    }
    const auto method = patch.param_path.substr(0, dot);
    const auto name = patch.param_path.substr(dot + 1);
    for (const auto* m : it->second.methods) {
      if (m->name != method) continue;
      const auto* p = m->find_param(name);
      if (!p) throw Error(ErrorCode::schema, "method '" + method + "' has no parameter '" + name + "'");
      patch.new_value = coerce_param(*p, patch.new_value);
      return;
    }
    throw Error(ErrorCode::schema, "node '" + patch.node_id + "' does not call method '" + method + "'");
  }

  void apply_patch(ConfigPatch patch, std::vector<EngineEvent>& out) {
    check_patch(patch);
    patch.applied_at_iteration = node_vector(patch.node_id);
    const std::size_t k = st().patch_log.size();
    const auto rec = run_.store->put(patch.node_id, "_patch" + std::to_string(k), patch.applied_at_iteration,
                                     DataKind::decision, patch.to_json().dump(), {});
    st().patch_log.push_back(patch);
    auto detail = patch.to_json();
    detail["artifact_id"] = rec.artifact_id;
    emit(out, "config-patched", patch.node_id, patch.applied_at_iteration, detail);
  }

  void answer(const std::string& request_id, const json& answer, Responder responder, std::vector<EngineEvent>& out) {
    auto& pending = st().pending_interactions;
    auto it = std::find_if(pending.begin(), pending.end(), [&](const auto& r) { return r.request_id == request_id; });
    if (it == pending.end()) {
      if (auto done = st().resolved_interactions.find(request_id); done != st().resolved_interactions.end()) {
        throw Error(ErrorCode::stale, "request '" + request_id + "' was already resolved by " + done->second);
      }
      throw Error(ErrorCode::not_found, "no interaction request '" + request_id + "'");
    }
    const InteractionRequest r = *it;
    const ArtifactValue value = materialize(r, answer);
    pending.erase(it);
    run_.deadlines.erase(request_id);
    st().resolved_interactions[request_id] = std::string(to_string(responder));

    const bool decision = !r.loop_id.empty();
    const std::string node = decision ? r.loop_id : r.node_id;
    const std::string port = decision ? "decision" : r.answer_port;
    const auto rec = run_.store->put(node, port, r.iteration, value.kind, value.bytes, r.payload, responder);
    emit(out, "interaction-answered", r.node_id, r.iteration,
         {{"request_id", request_id},
          {"answer", answer},
          {"responder", std::string(to_string(responder))},
          {"artifact_id", rec.artifact_id}});
    if (r.kind == kEditConfig && !answer.is_null()) apply_patch(ConfigPatch::from_json(answer), out);
    st().node_status[r.node_id] = NodeStatus::done;
    if (!decision) {
      emit(out, "node-finished", r.node_id, r.iteration, {{"outputs", {{port, rec.artifact_id}}}});
    }
  }

  std::size_t expire(std::vector<EngineEvent>& out) {
    if (st().phase != Phase::running) return 0;
    const auto t = now();
    std::vector<std::pair<std::string, json>> due;
    for (const auto& r : st().pending_interactions) {
      if (run_.deadlines.at(r.request_id) <= t) due.emplace_back(r.request_id, r.default_action);
    }
    for (const auto& [id, action] : due) answer(id, action, Responder::timeout_default, out);
    return due.size();
  }

 private:
  Engine::Run& run_;
  const EngineOptions& options_;
};

}  // namespace

Engine::Engine(std::shared_ptr<const PluginRegistry> registry, EngineOptions options)
    : registry_(std::move(registry)), options_(std::move(options)) {}

Engine::~Engine() {
  std::vector<std::shared_ptr<Run>> runs;
  {
    std::lock_guard lk(runs_mutex_);
    for (auto& [id, r] : runs_) runs.push_back(r);
  }
  for (auto& r : runs) {
    std::lock_guard lk(r->mu);
    r->stopping = true;
    r->cv.notify_all();
  }
  drivers_.clear();
}

std::shared_ptr<Engine::Run> Engine::find_run(const std::string& run_id) const {
  std::lock_guard lk(runs_mutex_);
  auto it = runs_.find(run_id);
  if (it == runs_.end()) throw Error(ErrorCode::not_found, "no run '" + run_id + "'");
  return it->second;
}

std::string Engine::start_run(const WorkflowSpec& raw_spec, const StartOptions& start) {
  const WorkflowSpec spec = normalize(raw_spec);
  const auto report = validate(spec, *registry_);
  if (!report.ok) throw Error(ErrorCode::validation, "workflow failed validation:\n" + report.to_text());

  auto run = std::make_shared<Run>();
  run->plan = plan(spec);
  for (const auto& n : spec.nodes) run->interfaces.emplace(n.id, node_interface(n, *registry_));

  const std::string run_id = start.run_id.empty() ? generate_run_id(options_.clock()) : start.run_id;
  check_run_id(run_id);
  run->dir = options_.runs_root / run_id;
  {
    std::lock_guard lk(runs_mutex_);
    if (runs_.count(run_id) || fs::exists(run->dir)) {
      throw Error(ErrorCode::conflict, "run directory already exists: " + run->dir.string());
    }
    fs::create_directories(run->dir / "checkpoints");
    runs_[run_id] = run;
  }
  write_atomic(run->dir / "spec.xml", serialize(spec));
  std::ofstream(run->dir / "events.jsonl", std::ios::app).close();

  auto& s = run->state;
  s.run_id = run_id;
  s.spec = spec;
  for (const auto& n : spec.nodes) s.node_status[n.id] = NodeStatus::pending;
  s.rng_seed = start.seed ? *start.seed : spec.seed.value_or(0);
  s.phase = Phase::running;
  s.base_dir = fs::absolute(start.base_dir.empty() ? fs::current_path() : start.base_dir).lexically_normal().string();
  s.default_timeout_s = start.default_timeout_s.value_or(options_.default_timeout_s);
  run->store = std::make_unique<ArtifactStore>(run->dir, run_id);

  std::lock_guard lk(run->mu);
  Executor ex(*run, options_);
  ex.write_checkpoint();
  ex.publish();
  return run_id;
}

std::vector<EngineEvent> Engine::step(const std::string& run_id) {
  auto run = find_run(run_id);
  std::lock_guard lk(run->mu);
  Executor ex(*run, options_);
  auto out = ex.step();
  ex.publish();
  run->cv.notify_all();
  return out;
}

Checkpoint Engine::pause(const std::string& run_id) {
  auto run = find_run(run_id);
  std::lock_guard lk(run->mu);
  Executor ex(*run, options_);
  std::vector<EngineEvent> out;
  auto c = ex.pause(out);
  ex.publish();
  run->cv.notify_all();
  return c;
}

std::string Engine::resume(const std::string& run_id) {
  auto run = find_run(run_id);
  {
    std::lock_guard lk(run->mu);
    if (run->state.phase == Phase::running) return run_id;
    if (run->state.phase != Phase::paused) {
      throw Error(ErrorCode::conflict, "run '" + run_id + "' is " + std::string(to_string(run->state.phase)));
    }
  }
  const auto files = checkpoint_files(run->dir);
  if (files.empty()) throw Error(ErrorCode::integrity, "run '" + run_id + "' has no checkpoint");
  return load_into(run->dir, files.back(), true);
}

std::string Engine::resume_from(const fs::path& checkpoint_path) {
  if (!fs::exists(checkpoint_path)) throw Error(ErrorCode::not_found, "no checkpoint " + checkpoint_path.string());
  const fs::path dir = fs::absolute(checkpoint_path).parent_path().parent_path();
  return load_into(dir, checkpoint_path, true);
}

std::string Engine::open_run(const fs::path& run_dir) {
  const auto files = checkpoint_files(run_dir);
  if (files.empty()) throw Error(ErrorCode::not_found, "no checkpoints under " + run_dir.string());
  return load_into(run_dir, files.back(), false);
}

std::string Engine::load_into(const fs::path& run_dir, const fs::path& checkpoint_path, bool continue_run) {
  json doc;
  try {
    doc = json::parse(read_file(checkpoint_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::integrity, "checkpoint " + checkpoint_path.string() + " is not valid JSON");
  }
  Checkpoint ck = Checkpoint::from_json(doc);
  const std::string run_id = ck.run_state.run_id;

  auto store = ArtifactStore::open(run_dir, run_id);
  const auto records = store->records();
  if (records.size() > ck.artifact_index.size()) {
    throw Error(ErrorCode::integrity, "provenance log has records past the checkpoint");
  }
  if (records.size() < ck.artifact_index.size()) {
    throw Error(ErrorCode::integrity, "provenance log is missing records named by the checkpoint");
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].artifact_id != ck.artifact_index[i]) {
      throw Error(ErrorCode::integrity, "provenance record " + std::to_string(i) + " does not match the checkpoint");
    }
  }

  std::vector<EngineEvent> events;
  {
    std::ifstream in(run_dir / "events.jsonl");
    std::string line;
    while (events.size() < ck.run_state.event_count && std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        events.push_back(EngineEvent::from_json(json::parse(line)));
      } catch (const json::exception&) {
        throw Error(ErrorCode::integrity, "events.jsonl has a malformed line");
      }
    }
    if (events.size() != ck.run_state.event_count) {
      throw Error(ErrorCode::integrity, "events.jsonl is shorter than the checkpoint's event count");
    }
  }

  if (continue_run && ck.run_state.phase == Phase::completed) {
    throw Error(ErrorCode::conflict, "run '" + run_id + "' already completed");
  }

  auto fresh = std::make_shared<Run>();
  fresh->dir = run_dir;
  fresh->plan = plan(ck.run_state.spec);
  for (const auto& n : ck.run_state.spec.nodes) {
    fresh->interfaces.emplace(n.id, node_interface(n, *registry_));
  }

  std::shared_ptr<Run> run;
  {
    std::lock_guard lk(runs_mutex_);
    auto it = runs_.find(run_id);
    run = it == runs_.end() ? (runs_[run_id] = fresh) : it->second;
  }

  std::lock_guard lk(run->mu);
  if (run != fresh && run->state.phase == Phase::running && continue_run) return run_id;
  if (run != fresh && run->state.phase == Phase::running) {
    throw Error(ErrorCode::conflict, "run '" + run_id + "' is running");
  }
  run->dir = run_dir;
  if (run != fresh) {
    run->plan = std::move(fresh->plan);
    run->interfaces = std::move(fresh->interfaces);
  }
  run->store = std::move(store);
  run->state = ck.run_state;
  run->checkpoint_count = checkpoint_files(run_dir).empty() ? 0 : [&] {
    const auto files = checkpoint_files(run_dir);
    return static_cast<std::size_t>(std::stoull(files.back().stem().string())) + 1;
  }();
  run->pause_checkpoint.reset();
  run->stopping = false;
  {
    std::string text;
    for (const auto& e : events) text += e.to_json().dump() + "\n";
    write_atomic(run_dir / "events.jsonl", text);
    std::lock_guard elk(run->events_mu);
    run->events = std::move(events);
    run->finished = run->state.phase == Phase::completed || run->state.phase == Phase::failed;
  }

  Executor ex(*run, options_);
  run->deadlines.clear();
  const auto now = options_.clock();
  for (const auto& r : run->state.pending_interactions) {
    run->deadlines[r.request_id] =
        now + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(r.timeout_s));
  }
  if (continue_run) {
    if (run->state.phase == Phase::failed) {
      // Retry the failed node from its start.
      for (auto& [node, status] : run->state.node_status) {
        if (status == NodeStatus::failed) status = NodeStatus::pending;
      }
      run->state.failure.clear();
      std::lock_guard elk(run->events_mu);
      run->finished = false;
    }
    run->state.phase = Phase::running;
    std::vector<EngineEvent> out;
    ex.emit(out, "run-resumed", "", {}, {{"checkpoint", ck.index}});
  } else if (run->state.phase == Phase::paused) {
    run->pause_checkpoint = ck;
  }
  ex.publish();
  run->cv.notify_all();
  return run_id;
}

void Engine::patch_config(const std::string& run_id, ConfigPatch patch) {
  auto run = find_run(run_id);
  std::lock_guard lk(run->mu);
  auto& s = run->state;
  if (s.phase == Phase::completed || s.phase == Phase::failed) {
    throw Error(ErrorCode::conflict, "run '" + run_id + "' is " + std::string(to_string(s.phase)));
  }
  auto status = s.node_status.find(patch.node_id);
  if (status == s.node_status.end()) throw Error(ErrorCode::not_found, "no node '" + patch.node_id + "'");
  if (s.phase != Phase::paused && status->second != NodeStatus::awaiting_interaction) {
    throw Error(ErrorCode::conflict, "pause required before patching '" + patch.node_id + "'");
  }
  Executor ex(*run, options_);
  std::vector<EngineEvent> out;
  ex.apply_patch(std::move(patch), out);
  auto c = ex.write_checkpoint();
  if (s.phase == Phase::paused) run->pause_checkpoint = std::move(c);
  ex.publish();
  run->cv.notify_all();
}

void Engine::answer_interaction(const std::string& run_id, const std::string& request_id, const json& answer,
                                Responder responder) {
  auto run = find_run(run_id);
  std::lock_guard lk(run->mu);
  if (run->state.phase == Phase::completed || run->state.phase == Phase::failed) {
    if (run->state.resolved_interactions.count(request_id)) {
      throw Error(ErrorCode::stale, "request '" + request_id + "' was already resolved");
    }
    throw Error(ErrorCode::conflict, "run '" + run_id + "' is " + std::string(to_string(run->state.phase)));
  }
  Executor ex(*run, options_);
  std::vector<EngineEvent> out;
  ex.answer(request_id, answer, responder, out);
  auto c = ex.write_checkpoint();
  if (run->state.phase == Phase::paused) run->pause_checkpoint = std::move(c);
  ex.publish();
  run->cv.notify_all();
}

std::size_t Engine::expire_interactions(const std::string& run_id) {
  auto run = find_run(run_id);
  std::lock_guard lk(run->mu);
  Executor ex(*run, options_);
  std::vector<EngineEvent> out;
  const auto n = ex.expire(out);
  if (n) {
    ex.publish();
    run->cv.notify_all();
  }
  return n;
}

std::shared_ptr<const RunSnapshot> Engine::snapshot(const std::string& run_id) const {
  auto run = find_run(run_id);
  std::lock_guard lk(run->snapshot_mu);
  return run->snapshot;
}

std::vector<std::string> Engine::list_runs() const {
  std::lock_guard lk(runs_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, r] : runs_) out.push_back(id);
  return out;
}

bool Engine::has_run(const std::string& run_id) const {
  std::lock_guard lk(runs_mutex_);
  return runs_.count(run_id) > 0;
}

std::vector<EngineEvent> Engine::events(const std::string& run_id, std::size_t since) const {
  auto run = find_run(run_id);
  std::lock_guard lk(run->events_mu);
  if (since >= run->events.size()) return {};
  return {run->events.begin() + static_cast<std::ptrdiff_t>(since), run->events.end()};
}

std::vector<EngineEvent> Engine::wait_events(const std::string& run_id, std::size_t since,
                                             std::chrono::milliseconds timeout) const {
  auto run = find_run(run_id);
  std::unique_lock lk(run->events_mu);
  run->events_cv.wait_for(lk, timeout, [&] { return run->events.size() > since || run->finished; });
  if (since >= run->events.size()) return {};
  return {run->events.begin() + static_cast<std::ptrdiff_t>(since), run->events.end()};
}

const ArtifactStore& Engine::store(const std::string& run_id) const {
  auto run = find_run(run_id);
  std::lock_guard lk(run->mu);
  return *run->store;
}

fs::path Engine::run_dir(const std::string& run_id) const { return find_run(run_id)->dir; }

std::vector<fs::path> Engine::checkpoints(const std::string& run_id) const {
  return checkpoint_files(find_run(run_id)->dir);
}

Phase Engine::drive(const std::string& run_id) {
  auto run = find_run(run_id);
  std::unique_lock lk(run->mu);
  run->driven = true;
  const auto phase = drive_locked(*run, lk);
  run->driven = false;
  return phase;
}

Phase Engine::drive_locked(Run& r, std::unique_lock<std::mutex>& lk) {
  Run* run = &r;
  Executor ex(*run, options_);
  for (;;) {
    auto& s = run->state;
    if (run->stopping || s.phase == Phase::completed || s.phase == Phase::failed) return s.phase;
    if (s.phase == Phase::paused) {
      if (options_.pause_on_interaction) return s.phase;
      run->cv.wait(lk);
      continue;
    }
    if (!s.pending_interactions.empty()) {
      std::vector<EngineEvent> out;
      if (ex.expire(out) > 0) {
        ex.publish();
        continue;
      }
      auto earliest = Clock::time_point::max();
      for (const auto& [id, t] : run->deadlines) earliest = std::min(earliest, t);
      run->cv.wait_until(lk, earliest);
      continue;
    }
    ex.step();
    ex.publish();
    lk.unlock();
    std::this_thread::yield();
    lk.lock();
  }
}

bool Engine::launch(const std::string& run_id) {
  auto run = find_run(run_id);
  {
    std::lock_guard lk(run->mu);
    if (run->driven) return false;
    run->driven = true;
  }
  std::lock_guard lk(runs_mutex_);
  drivers_.emplace_back([this, run] {
    std::unique_lock lk(run->mu);
    drive_locked(*run, lk);
    run->driven = false;
  });
  return true;
}

Phase Engine::wait(const std::string& run_id) const {
  auto run = find_run(run_id);
  std::unique_lock lk(run->events_mu);
  run->events_cv.wait(lk, [&] { return run->finished; });
  lk.unlock();
  std::lock_guard slk(run->mu);
  return run->state.phase;
}

}  // namespace labloom
