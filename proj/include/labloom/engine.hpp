#pragma once

#include "labloom/datastore.hpp"
#include "labloom/plan.hpp"
#include "labloom/plugin.hpp"
#include "labloom/validate.hpp"
#include "labloom/workflow.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace labloom {

enum class NodeStatus { pending, running, awaiting_interaction, done, failed, skipped };
enum class Phase { running, paused, completed, failed };

std::string_view to_string(NodeStatus status);
std::string_view to_string(Phase phase);

/// Interaction kinds understood by the engine.
inline constexpr std::string_view kTerminateDecision = "terminate-decision";
inline constexpr std::string_view kApproveSuggestions = "approve-suggestions";
inline constexpr std::string_view kEditConfig = "edit-config";
inline constexpr std::string_view kLabelItem = "label-item";

struct InteractionRequest {
  std::string request_id;
  std::string node_id;
  std::string kind;
  std::string prompt;
  std::vector<std::string> payload;  // artifact ids shown to the human
  json default_action;
  double timeout_s = 0.0;
  std::string created_at;
  /// Loop a terminate-decision belongs to; empty for plugin-raised requests.
  std::string loop_id;
  /// Output port receiving the answer of a plugin-raised request.
  std::string answer_port;
  IterationVector iteration;

  json to_json() const;
  static InteractionRequest from_json(const json& j);
  bool operator==(const InteractionRequest&) const = default;
};

struct ConfigPatch {
  std::string node_id;
  std::string param_path;  // method.param
  json new_value;
  IterationVector applied_at_iteration;

  json to_json() const;
  static ConfigPatch from_json(const json& j);
  bool operator==(const ConfigPatch&) const = default;
};

struct EngineEvent {
  std::size_t index = 0;  // 1-based, gapless per run
  std::string type;
  std::string run_id;
  std::string node_id;
  IterationVector iteration;
  json detail = json::object();
  std::string at;

  json to_json() const;
  static EngineEvent from_json(const json& j);
};

struct RunState {
  std::string run_id;
  WorkflowSpec spec;
  std::map<std::string, NodeStatus> node_status;
  std::map<std::string, std::size_t> iteration;  // active loops only
  std::uint64_t rng_seed = 0;
  Phase phase = Phase::running;
  std::vector<InteractionRequest> pending_interactions;
  std::vector<ConfigPatch> patch_log;

  // Execution cursor.
  std::size_t pc = 0;  // position in the plan program
  /// Request ids already answered, with the responder.
  std::map<std::string, std::string> resolved_interactions;
  std::size_t next_request = 1;
  std::size_t event_count = 0;
  std::string base_dir;
  double default_timeout_s = 60.0;
  std::string failure;

  json to_json() const;
  static RunState from_json(const json& j);
};

struct Checkpoint {
  std::size_t index = 0;
  RunState run_state;
  std::vector<std::string> artifact_index;
  std::string content_hash;

  /// Hash over run_state and artifact_index in canonical JSON.
  std::string compute_hash() const;
  json to_json() const;
  /// Throws Error(integrity) when the stored hash does not verify.
  static Checkpoint from_json(const json& j);
};

/// Read-only view of a run, published after every command.
struct RunSnapshot {
  std::string run_id;
  std::string workflow;
  Phase phase = Phase::running;
  std::map<std::string, NodeStatus> node_status;
  std::map<std::string, std::size_t> iteration;
  std::vector<InteractionRequest> pending_interactions;
  std::vector<ConfigPatch> patch_log;
  std::size_t event_count = 0;
  std::size_t checkpoints = 0;
  std::string failure;

  json to_json() const;
};

struct EngineOptions {
  std::filesystem::path runs_root = "runs";
  /// Timeout for plugin-raised interactions that do not carry their own.
  double default_timeout_s = 60.0;
  /// Pause the run whenever an interaction is raised.
  bool pause_on_interaction = false;
  std::function<std::chrono::system_clock::time_point()> clock = [] { return std::chrono::system_clock::now(); };
};

struct StartOptions {
  std::optional<std::uint64_t> seed;  // overrides the spec's seed attribute
  std::string run_id;                 // generated when empty
  std::filesystem::path base_dir;     // folder sources and simulator files resolve here
  std::optional<double> default_timeout_s;  // overrides EngineOptions for this run
};

/// Runs directory root: $LABLOOM_RUNS_DIR when set, else ./runs.
std::filesystem::path default_runs_root();

/// 16 hex digit stream key of a node invocation.
std::string rng_key(std::uint64_t seed, const std::string& node, const IterationVector& iteration);

/// Executes workflows. Every command on a run is serialized through that
/// run's mutex; readers use the published snapshot and the event log.
class Engine {
 public:
  Engine(std::shared_ptr<const PluginRegistry> registry, EngineOptions options = {});
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const EngineOptions& options() const { return options_; }
  const PluginRegistry& registry() const { return *registry_; }

  /// Validates, creates runs/<id>/ and writes checkpoint 0. Throws
  /// Error(validation) with the report text, Error(conflict) on an existing directory.
  std::string start_run(const WorkflowSpec& spec, const StartOptions& start = {});

  /// Executes the next node plus the loop markers after it.
  std::vector<EngineEvent> step(const std::string& run_id);
  Checkpoint pause(const std::string& run_id);
  /// Rebuilds the run from its newest checkpoint and continues it.
  std::string resume(const std::string& run_id);
  /// Loads a run directory from a specific checkpoint file and continues it.
  std::string resume_from(const std::filesystem::path& checkpoint_path);
  /// Loads a run directory (newest checkpoint) without changing its phase.
  std::string open_run(const std::filesystem::path& run_dir);

  void patch_config(const std::string& run_id, ConfigPatch patch);
  void answer_interaction(const std::string& run_id, const std::string& request_id, const json& answer,
                          Responder responder = Responder::human);
  /// Applies default actions of requests whose deadline passed.
  std::size_t expire_interactions(const std::string& run_id);

  std::shared_ptr<const RunSnapshot> snapshot(const std::string& run_id) const;
  std::vector<std::string> list_runs() const;
  bool has_run(const std::string& run_id) const;

  /// Events with index > since, in order.
  std::vector<EngineEvent> events(const std::string& run_id, std::size_t since) const;
  /// Blocks until events past `since` exist, the run finished, or the timeout passed.
  std::vector<EngineEvent> wait_events(const std::string& run_id, std::size_t since,
                                       std::chrono::milliseconds timeout) const;

  const ArtifactStore& store(const std::string& run_id) const;
  std::filesystem::path run_dir(const std::string& run_id) const;
  std::vector<std::filesystem::path> checkpoints(const std::string& run_id) const;

  /// Steps until completion or failure, waiting for answers and deadlines
  /// and sitting out pauses. Returns the final phase.
  Phase drive(const std::string& run_id);
  /// drive() on a background thread owned by the engine; false when the
  /// run already has a driver.
  bool launch(const std::string& run_id);
  /// Blocks until the run completes or fails.
  Phase wait(const std::string& run_id) const;

 public:
  struct Run;  // opaque per-run state

 private:

  std::shared_ptr<Run> find_run(const std::string& run_id) const;
  Phase drive_locked(Run& run, std::unique_lock<std::mutex>& lock);
  std::string load_into(const std::filesystem::path& run_dir, const std::filesystem::path& checkpoint_path,
                        bool continue_run);

  std::shared_ptr<const PluginRegistry> registry_;
  EngineOptions options_;
  mutable std::mutex runs_mutex_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
  std::vector<std::jthread> drivers_;
};

}  // namespace labloom
