#pragma once

#include "labloom/iteration.hpp"
#include "labloom/kinds.hpp"
#include "labloom/plugin.hpp"
#include "labloom/table.hpp"
#include "labloom/workflow.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace labloom {

/// Who produced an interaction answer.
enum class Responder { human, timeout_default, simulated };

std::string_view to_string(Responder responder);
std::optional<Responder> parse_responder(std::string_view text);

/// ISO-8601 UTC timestamp with millisecond precision.
std::string format_timestamp(std::chrono::system_clock::time_point t);

struct ArtifactRecord {
  std::string artifact_id;  // sha256 of the stored bytes
  std::string run_id;
  std::string node_id;
  std::string port;
  IterationVector iteration;
  DataKind kind = DataKind::scalar;
  Format format = Format::json;
  std::string created_at;
  std::vector<std::string> parent_ids;
  /// Set on interaction answers only.
  std::optional<Responder> responder;

  json to_json() const;
  static ArtifactRecord from_json(const json& j);

  bool operator==(const ArtifactRecord&) const = default;
};

/// Relative location of an artifact inside a run directory.
std::filesystem::path artifact_relpath(const std::string& node, const IterationVector& iteration,
                                       const std::string& port, Format format);

/// Append-only, content-addressed artifact store of one run.
///
/// Records are appended to provenance.jsonl in creation order. Artifact ids
/// are content hashes, so the same bytes may appear under several records;
/// a parent id always refers to the newest record with that id created
/// before the child, which keeps the provenance graph acyclic.
class ArtifactStore {
 public:
  ArtifactStore(std::filesystem::path run_dir, std::string run_id);

  /// Reopens an existing run directory from its provenance.jsonl.
  /// Throws Error(integrity) when a file is missing or does not re-hash.
  static std::unique_ptr<ArtifactStore> open(std::filesystem::path run_dir, std::string run_id);

  const std::filesystem::path& run_dir() const { return run_dir_; }
  const std::string& run_id() const { return run_id_; }

  /// Writes the payload and appends its record. Errors: empty payload
  /// (schema), occupied (node, port, iteration) slot (immutability),
  /// unknown parent (provenance).
  ArtifactRecord put(const std::string& node, const std::string& port, const IterationVector& iteration,
                     DataKind kind, const std::string& bytes, const std::vector<std::string>& parents,
                     std::optional<Responder> responder = std::nullopt,
                     std::chrono::system_clock::time_point created = std::chrono::system_clock::now());

  std::optional<ArtifactRecord> get(const std::string& node, const std::string& port,
                                    const IterationVector& iteration) const;
  /// Newest record for (node, port) in creation order.
  std::optional<ArtifactRecord> latest(const std::string& node, const std::string& port) const;
  /// Newest record carrying this id; throws Error(not_found).
  ArtifactRecord find(const std::string& artifact_id) const;
  bool contains(const std::string& artifact_id) const;

  /// Bytes plus metadata, ready to hand to a plugin.
  ArtifactValue load(const ArtifactRecord& record) const;

  std::vector<ArtifactRecord> records() const;
  std::size_t size() const;

  /// Every transitive ancestor of the newest record with this id, itself
  /// included, in topological order with ties broken by artifact id.
  std::vector<ArtifactRecord> provenance_chain(const std::string& artifact_id) const;

  /// Re-hashes every stored file; throws Error(integrity) on the first mismatch.
  void verify() const;

 private:
  std::size_t index_of(const std::string& artifact_id) const;
  void index_record(ArtifactRecord record, std::vector<std::size_t> parents);

  std::filesystem::path run_dir_;
  std::string run_id_;
  std::vector<ArtifactRecord> records_;
  std::vector<std::vector<std::size_t>> parents_;
  std::map<std::string, std::size_t> latest_by_id_;
  std::map<std::tuple<std::string, std::string, IterationVector>, std::size_t> by_slot_;
  std::map<std::pair<std::string, std::string>, std::size_t> latest_by_port_;
  mutable std::shared_mutex mutex_;
};

/// One file picked up by a folder source.
struct FolderFile {
  std::filesystem::path path;
  std::string stem;
  std::string bytes;
};

/// Files under `base_dir / source.path` whose names match the glob pattern,
/// sorted by name and parse-checked against the format tag.
/// Throws Error(resolution) when nothing matches, Error(parse) on bad content.
std::vector<FolderFile> read_folder(const std::filesystem::path& base_dir, const FolderSource& source);

/// Slot name under which a folder file is registered as a root artifact.
std::string folder_port(const FolderSource& source, const std::string& stem);

inline constexpr std::string_view kFolderNode = "_folder";

enum class ColumnRole { feature, target, id, meta };
enum class ColumnType { number, integer, boolean, text };

std::string_view to_string(ColumnRole role);
std::string_view to_string(ColumnType type);

struct ColumnInfo {
  std::string name;
  ColumnRole role = ColumnRole::feature;
  ColumnType type = ColumnType::number;

  bool operator==(const ColumnInfo&) const = default;
};

/// A table plus declared column roles and optional row partitions.
struct Dataset {
  std::vector<ColumnInfo> columns;
  Table rows;
  std::map<std::string, std::vector<std::size_t>> partitions;

  /// Throws Error(schema) when roles or partitions break their invariants.
  void check() const;
  std::vector<std::string> names_with(ColumnRole role) const;

  /// Sidecar form: {"columns":[{"name","role","type"}],"partitions":{...}}.
  json schema_json() const;
  /// Builds from a table and its sidecar; columns missing from the sidecar are meta text.
  static Dataset from(Table table, const json& schema);
};

struct ProblemContext {
  bool supervised = false;
  std::vector<std::string> target_columns;
  bool has_partitions = false;

  json to_json() const;
  static ProblemContext from_json(const json& j);
  bool operator==(const ProblemContext&) const = default;
};

ProblemContext detect_problem_context(const Dataset& dataset);

}  // namespace labloom
