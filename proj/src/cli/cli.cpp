#include "labloom/cli.hpp"

#include "labloom/builtins.hpp"
#include "labloom/engine.hpp"
#include "labloom/error.hpp"
#include "labloom/external_plugin.hpp"
#include "labloom/hash.hpp"
#include "labloom/service.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace labloom {

namespace fs = std::filesystem;

namespace {

/// Error raised by the CLI itself for unreadable inputs (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void require_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("no run directory " + dir.string());
}

/// JSON when it parses, else the raw text as a JSON string.
json loose_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

struct Common {
  std::vector<std::string> plugins;
  std::string runs_dir;
  bool json_out = false;
};

std::shared_ptr<PluginRegistry> make_registry(const Common& c) {
  auto registry = builtin_registry();
  for (const auto& p : c.plugins) {
    if (!fs::exists(p)) throw UsageError("no plugin executable " + p);
    registry->register_plugin(spawn_external({p}));
  }
  return registry;
}

EngineOptions engine_options(const Common& c) {
  EngineOptions o;
  o.runs_root = c.runs_dir.empty() ? default_runs_root() : fs::path(c.runs_dir);
  return o;
}

/// Opens an existing run directory; the runs root is its parent.
std::string open_existing(std::unique_ptr<Engine>& engine, const Common& c, const fs::path& dir) {
  require_dir(dir);
  auto o = engine_options(c);
  o.runs_root = fs::absolute(dir).parent_path();
  engine = std::make_unique<Engine>(make_registry(c), o);
  return engine->open_run(fs::absolute(dir));
}

std::string artifact_digest(const ArtifactStore& store) {
  std::vector<std::string> ids;
  for (const auto& r : store.records()) ids.push_back(r.artifact_id);
  std::sort(ids.begin(), ids.end());
  std::string joined;
  for (const auto& id : ids) joined += id + "\n";
  return sha256_hex(joined);
}

/// Latest value of every Output node port.
json output_values(Engine& engine, const std::string& run_id, const WorkflowSpec& spec) {
  json outputs = json::object();
  const auto& store = engine.store(run_id);
  for (const auto& r : store.records()) {
    const auto* node = spec.find_node(r.node_id);
    if (!node || node->kind != ModuleKind::output) continue;
    const auto value = store.load(r);
    outputs[r.node_id][r.port] = r.format == Format::json ? value.value() : json(value.bytes);
  }
  return outputs;
}

int report_outcome(Engine& engine, const std::string& id, const WorkflowSpec& spec, const Common& c,
                   std::ostream& out, std::ostream& err) {
  const auto snap = engine.snapshot(id);
  if (snap->phase == Phase::failed) {
    err << "run failed at node " << snap->failure << '\n';
    if (c.json_out) out << json{{"run_id", id}, {"phase", "failed"}, {"failure", snap->failure}}.dump() << '\n';
    return kExitFailure;
  }
  if (snap->phase == Phase::paused) {
    json pending = json::array();
    for (const auto& r : snap->pending_interactions) pending.push_back(r.to_json());
    const auto files = engine.checkpoints(id);
    const std::string checkpoint = files.empty() ? std::string() : files.back().string();
    if (c.json_out) {
      out << json{{"run_id", id}, {"phase", "paused"}, {"checkpoint", checkpoint}, {"pending", pending}}.dump()
          << '\n';
    } else {
      out << "run_id: " << id << "\nphase: paused\ncheckpoint: " << checkpoint << '\n';
      for (const auto& r : snap->pending_interactions) {
        out << "pending " << r.request_id << " " << r.kind << " at " << r.node_id
            << " default=" << r.default_action.dump() << '\n';
      }
    }
    return kExitOk;
  }
  const auto& store = engine.store(id);
  const auto outputs = output_values(engine, id, spec);
  const auto digest = artifact_digest(store);
  if (c.json_out) {
    out << json{{"run_id", id},
                {"phase", std::string(to_string(snap->phase))},
                {"artifacts", store.size()},
                {"artifact_digest", digest},
                {"outputs", outputs}}
               .dump()
        << '\n';
  } else {
    out << "run_id: " << id << '\n';
    out << "phase: " << to_string(snap->phase) << '\n';
    out << "events: " << snap->event_count << '\n';
    out << "artifacts: " << store.size() << '\n';
    out << "artifact_digest: " << digest << '\n';
    for (const auto& [node, ports] : outputs.items()) {
      for (const auto& [port, value] : ports.items()) out << "output " << node << "." << port << ": " << value.dump() << '\n';
    }
  }
  return snap->phase == Phase::completed ? kExitOk : kExitFailure;
}

void answer_defaults(Engine& engine, const std::string& id) {
  for (const auto& r : engine.snapshot(id)->pending_interactions) {
    engine.answer_interaction(id, r.request_id, r.default_action, Responder::timeout_default);
  }
}

int cmd_validate(const std::string& path, const Common& c, std::ostream& out) {
  const auto text = read_text(path);
  ValidationReport report;
  try {
    const auto spec = parse_workflow(text);
    report = validate(spec, *make_registry(c));
  } catch (const ParseError& e) {
    report.error("line " + std::to_string(e.line()) + ":" + std::to_string(e.column()), e.what());
  } catch (const Error& e) {
    report.error(std::string(to_string(e.code())), e.what());
  }
  if (c.json_out) {
    out << report.to_json().dump() << '\n';
  } else {
    out << report.to_text();
    out << (report.ok ? "ok" : "invalid: " + std::to_string(report.error_count()) + " error(s)") << '\n';
  }
  return report.ok ? kExitOk : kExitFailure;
}

struct RunFlags {
  std::optional<std::uint64_t> seed;
  bool headless = false;
  std::string serve;
  std::string run_id;
  bool pause_at_interaction = false;
};

template <typename F>
int with_service(Engine& engine, const std::string& serve, const fs::path& base_dir, bool headless, F&& drive) {
  if (serve.empty()) return drive();
  ServiceOptions so;
  so.base_dir = base_dir;
  so.headless = headless;
  ControlService service(engine, so);
  const auto [host, port] = parse_address(serve);
  service.start(host, port);
  const int rc = drive();
  service.stop();
  return rc;
}

int cmd_run(const std::string& path, const RunFlags& f, const Common& c, std::ostream& out, std::ostream& err) {
  const auto text = read_text(path);
  WorkflowSpec spec = parse_workflow(text);
  auto o = engine_options(c);
  o.pause_on_interaction = f.pause_at_interaction;
  Engine engine(make_registry(c), o);
  StartOptions start;
  start.seed = f.seed;
  start.run_id = f.run_id;
  start.base_dir = fs::absolute(path).parent_path();
  if (f.headless) {
    spec = headless_spec(std::move(spec));
    start.default_timeout_s = 0.0;
  }
  const auto id = engine.start_run(spec, start);
  return with_service(engine, f.serve, start.base_dir, f.headless, [&] {
    engine.drive(id);
    return report_outcome(engine, id, normalize(spec), c, out, err);
  });
}

int cmd_resume(const std::string& checkpoint, const RunFlags& f, const Common& c, std::ostream& out,
               std::ostream& err) {
  if (!fs::is_regular_file(checkpoint)) throw UsageError("no checkpoint file " + checkpoint);
  auto o = engine_options(c);
  o.runs_root = fs::absolute(checkpoint).parent_path().parent_path().parent_path();
  o.pause_on_interaction = f.pause_at_interaction;
  Engine engine(make_registry(c), o);
  const auto id = engine.resume_from(checkpoint);
  if (f.headless) answer_defaults(engine, id);
  json spec_doc = json::parse(read_text(checkpoint));
  const auto spec = parse_workflow(spec_doc.at("run_state").at("spec").get<std::string>());
  return with_service(engine, f.serve, fs::current_path(), f.headless, [&] {
    engine.drive(id);
    return report_outcome(engine, id, spec, c, out, err);
  });
}

int cmd_status(const std::string& dir, const Common& c, std::ostream& out) {
  std::unique_ptr<Engine> engine;
  const auto id = open_existing(engine, c, dir);
  const auto snap = engine->snapshot(id);
  if (c.json_out) {
    auto j = snap->to_json();
    j["artifacts"] = engine->store(id).size();
    out << j.dump() << '\n';
    return kExitOk;
  }
  out << "run_id=" << id << '\n';
  out << "phase=" << to_string(snap->phase) << '\n';
  for (const auto& [node, status] : snap->node_status) out << "node " << node << "=" << to_string(status) << '\n';
  for (const auto& [loop, index] : snap->iteration) out << "loop " << loop << "=" << index << '\n';
  for (const auto& r : snap->pending_interactions) {
    out << "pending " << r.request_id << " " << r.kind << " at " << r.node_id << '\n';
  }
  out << "events=" << snap->event_count << '\n';
  out << "artifacts=" << engine->store(id).size() << '\n';
  if (!snap->failure.empty()) out << "failure=" << snap->failure << '\n';
  return kExitOk;
}

int cmd_answer(const std::string& dir, const std::string& request_id, const std::string& answer, const Common& c,
               std::ostream& out) {
  std::unique_ptr<Engine> engine;
  const auto id = open_existing(engine, c, dir);
  engine->answer_interaction(id, request_id, loose_json(answer));
  const auto files = engine->checkpoints(id);
  if (c.json_out) {
    out << json{{"ok", true}, {"checkpoint", files.back().string()}}.dump() << '\n';
  } else {
    out << "answered " << request_id << "\ncheckpoint: " << files.back().string() << '\n';
  }
  return kExitOk;
}

int cmd_patch(const std::string& dir, const std::string& node, const std::string& param, const std::string& value,
              const Common& c, std::ostream& out) {
  std::unique_ptr<Engine> engine;
  const auto id = open_existing(engine, c, dir);
  engine->patch_config(id, ConfigPatch{node, param, loose_json(value), {}});
  const auto files = engine->checkpoints(id);
  if (c.json_out) {
    out << json{{"ok", true}, {"checkpoint", files.back().string()}}.dump() << '\n';
  } else {
    out << "patched " << node << "." << param << "\ncheckpoint: " << files.back().string() << '\n';
  }
  return kExitOk;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

int cmd_export(const std::string& dir, const std::string& format, const std::string& out_path, const Common& c,
               std::ostream& out) {
  std::unique_ptr<Engine> engine;
  const auto id = open_existing(engine, c, dir);
  const auto& store = engine->store(id);
  json rows = json::array();
  std::string csv = "node,port,iteration,value\n";
  for (const auto& r : store.records()) {
    if (r.kind != DataKind::scalar) continue;
    const json v = store.load(r).value();
    rows.push_back({{"node", r.node_id}, {"port", r.port}, {"iteration", r.iteration.render()}, {"value", v}});
    const std::string cell = v.is_number() ? format_number(v.get<double>()) : v.dump();
    csv += csv_cell(r.node_id) + "," + csv_cell(r.port) + "," + csv_cell(r.iteration.render()) + "," + csv_cell(cell) +
           "\n";
  }
  const std::string text = format == "json" ? rows.dump(2) + "\n" : csv;
  if (out_path.empty() || out_path == "-") {
    out << text;
  } else {
    std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw UsageError("cannot write " + out_path);
    file << text;
    out << "exported " << rows.size() << " scalar(s) to " << out_path << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"labloom: workflow engine for virtual laboratories", "labloom"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--plugin", common.plugins, "External plugin executable (repeatable)");
  app.add_option("--runs-dir", common.runs_dir, "Runs directory root (default $LABLOOM_RUNS_DIR or ./runs)");
  app.add_flag("--json", common.json_out, "Machine-readable output");

  std::string spec_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a workflow spec");
  validate_cmd->add_option("spec", spec_path, "Workflow XML")->required();

  RunFlags flags;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Execute a workflow");
  run_cmd->add_option("spec", spec_path, "Workflow XML")->required();
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Seed overriding the spec's");
  run_cmd->add_flag("--headless", flags.headless, "Force every interaction timeout to 0");
  run_cmd->add_option("--serve", flags.serve, "Expose the control API on host:port");
  run_cmd->add_option("--run-id", flags.run_id, "Run id (default: timestamp plus random suffix)");
  run_cmd->add_flag("--pause-at-interaction", flags.pause_at_interaction, "Pause and exit when input is needed");

  std::string checkpoint;
  auto* resume_cmd = app.add_subcommand("resume", "Continue a run from a checkpoint file");
  resume_cmd->add_option("checkpoint", checkpoint, "checkpoints/<k>.json of a run")->required();
  resume_cmd->add_flag("--headless", flags.headless, "Apply defaults to pending interactions");
  resume_cmd->add_option("--serve", flags.serve, "Expose the control API on host:port");
  resume_cmd->add_flag("--pause-at-interaction", flags.pause_at_interaction, "Pause and exit when input is needed");

  std::string run_dir;
  auto* status_cmd = app.add_subcommand("status", "Show the state of a run");
  status_cmd->add_option("run_dir", run_dir, "Run directory")->required();

  std::string request_id;
  std::string answer;
  auto* answer_cmd = app.add_subcommand("answer", "Answer a pending interaction of a paused run");
  answer_cmd->add_option("run_dir", run_dir, "Run directory")->required();
  answer_cmd->add_option("request_id", request_id, "Request id")->required();
  answer_cmd->add_option("answer", answer, "Answer (JSON, or plain text for a string)")->required();

  std::string node;
  std::string param;
  std::string value;
  auto* patch_cmd = app.add_subcommand("patch", "Change a plugin parameter of a paused run");
  patch_cmd->add_option("run_dir", run_dir, "Run directory")->required();
  patch_cmd->add_option("node", node, "Node id")->required();
  patch_cmd->add_option("param", param, "method.param")->required();
  patch_cmd->add_option("value", value, "New value (JSON or plain text)")->required();

  std::string format = "csv";
  std::string out_path;
  auto* export_cmd = app.add_subcommand("export", "Flatten the scalar artifacts of a run into one table");
  export_cmd->add_option("run_dir", run_dir, "Run directory")->required();
  export_cmd->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  export_cmd->add_option("--out", out_path, "Output file (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  if (*seed_opt) flags.seed = seed;

  try {
    if (*validate_cmd) return cmd_validate(spec_path, common, out);
    if (*run_cmd) return cmd_run(spec_path, flags, common, out, err);
    if (*resume_cmd) return cmd_resume(checkpoint, flags, common, out, err);
    if (*status_cmd) return cmd_status(run_dir, common, out);
    if (*answer_cmd) return cmd_answer(run_dir, request_id, answer, common, out);
    if (*patch_cmd) return cmd_patch(run_dir, node, param, value, common, out);
    if (*export_cmd) return cmd_export(run_dir, format, out_path, common, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: line " << e.line() << ":" << e.column() << ": " << e.what() << '\n';
    return kExitFailure;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return e.code() == ErrorCode::io ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace labloom
