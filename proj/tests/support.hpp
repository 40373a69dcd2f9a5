#pragma once

#include "labloom/builtins.hpp"
#include "labloom/engine.hpp"
#include "labloom/service.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

namespace labloom::test {

namespace fs = std::filesystem;

inline fs::path source_dir() { return fs::path(LABLOOM_SOURCE_DIR); }
inline fs::path demo_dir(const std::string& name) { return source_dir() / "demos" / name; }

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Empty scratch directory unique to this process.
inline fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("labloom-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline WorkflowSpec load_demo(const std::string& name) {
  return parse_workflow(read_file(demo_dir(name) / "workflow.xml"));
}

inline json demo_simulator(const std::string& name) {
  return json::parse(read_file(demo_dir(name) / "simulator.json"));
}

struct RunResult {
  std::unique_ptr<Engine> engine;
  std::string id;
  Phase phase = Phase::running;

  const ArtifactStore& store() const { return engine->store(id); }
};

inline std::unique_ptr<Engine> make_engine(const fs::path& runs_root) {
  EngineOptions o;
  o.runs_root = runs_root;
  return std::make_unique<Engine>(builtin_registry(), o);
}

inline StartOptions start_options(const fs::path& base_dir, std::uint64_t seed, bool headless) {
  StartOptions s;
  s.seed = seed;
  s.base_dir = base_dir;
  if (headless) s.default_timeout_s = 0.0;
  return s;
}

/// Starts and drives a run to its end.
inline RunResult run_spec(const WorkflowSpec& spec, const fs::path& base_dir, std::uint64_t seed,
                          const fs::path& runs_root, bool headless = true) {
  RunResult r;
  r.engine = make_engine(runs_root);
  r.id = r.engine->start_run(headless ? headless_spec(spec) : spec, start_options(base_dir, seed, headless));
  r.phase = r.engine->drive(r.id);
  return r;
}

inline std::multiset<std::string> artifact_ids(const ArtifactStore& store) {
  std::multiset<std::string> ids;
  for (const auto& r : store.records()) ids.insert(r.artifact_id);
  return ids;
}

/// (node, port, iteration, id) of every record, ignoring timestamps.
inline std::set<std::string> artifact_slots(const ArtifactStore& store) {
  std::set<std::string> slots;
  for (const auto& r : store.records()) {
    slots.insert(r.node_id + "|" + r.port + "|" + r.iteration.render() + "|" + r.artifact_id);
  }
  return slots;
}

inline Table latest_table(const ArtifactStore& store, const std::string& node, const std::string& port) {
  return store.load(*store.latest(node, port)).table();
}

inline json latest_json(const ArtifactStore& store, const std::string& node, const std::string& port) {
  return store.load(*store.latest(node, port)).value();
}

}  // namespace labloom::test
