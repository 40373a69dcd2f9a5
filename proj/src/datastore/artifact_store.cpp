#include "labloom/datastore.hpp"

#include "labloom/error.hpp"
#include "labloom/hash.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <mutex>
#include <queue>
#include <set>
#include <sstream>

namespace labloom {

namespace fs = std::filesystem;

std::string_view to_string(Responder responder) {
  switch (responder) {
    case Responder::human: return "human";
    case Responder::timeout_default: return "timeout-default";
    case Responder::simulated: return "simulated";
  }
  return "?";
}

std::optional<Responder> parse_responder(std::string_view text) {
  for (auto r : {Responder::human, Responder::timeout_default, Responder::simulated}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

std::string format_timestamp(std::chrono::system_clock::time_point t) {
  const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(t);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t - secs).count();
  const std::time_t tt = std::chrono::system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

json ArtifactRecord::to_json() const {
  json j = {{"artifact_id", artifact_id},
            {"run_id", run_id},
            {"node_id", node_id},
            {"port", port},
            {"iteration", iteration.render()},
            {"kind", std::string(to_string(kind))},
            {"format", std::string(to_string(format))},
            {"created_at", created_at},
            {"parent_ids", parent_ids}};
  if (responder) j["responder"] = std::string(to_string(*responder));
  return j;
}

ArtifactRecord ArtifactRecord::from_json(const json& j) {
  try {
    ArtifactRecord r;
    r.artifact_id = j.at("artifact_id").get<std::string>();
    r.run_id = j.at("run_id").get<std::string>();
    r.node_id = j.at("node_id").get<std::string>();
    r.port = j.at("port").get<std::string>();
    r.iteration = IterationVector::parse(j.at("iteration").get<std::string>());
    const auto kind = parse_data_kind(j.at("kind").get<std::string>());
    const auto format = parse_format(j.at("format").get<std::string>());
    if (!kind || !format) throw Error(ErrorCode::integrity, "artifact record has an unknown kind or format");
    r.kind = *kind;
    r.format = *format;
    r.created_at = j.at("created_at").get<std::string>();
    r.parent_ids = j.at("parent_ids").get<std::vector<std::string>>();
    if (j.contains("responder")) {
      r.responder = parse_responder(j.at("responder").get<std::string>());
      if (!r.responder) throw Error(ErrorCode::integrity, "artifact record has an unknown responder");
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::integrity, std::string("malformed artifact record: ") + e.what());
  }
}

fs::path artifact_relpath(const std::string& node, const IterationVector& iteration, const std::string& port,
                          Format format) {
  return fs::path("artifacts") / node / iteration.render() / (port + "." + std::string(to_string(format)));
}

namespace {

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::io, "short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

}  // namespace

ArtifactStore::ArtifactStore(fs::path run_dir, std::string run_id)
    : run_dir_(std::move(run_dir)), run_id_(std::move(run_id)) {}

std::unique_ptr<ArtifactStore> ArtifactStore::open(fs::path run_dir, std::string run_id) {
  auto handle = std::make_unique<ArtifactStore>(std::move(run_dir), std::move(run_id));
  auto& store = *handle;
  const fs::path log = store.run_dir_ / "provenance.jsonl";
  if (!fs::exists(log)) return handle;
  std::ifstream in(log);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw Error(ErrorCode::integrity, "provenance.jsonl line " + std::to_string(lineno) + " is not JSON");
    }
    auto record = ArtifactRecord::from_json(j);
    std::vector<std::size_t> parents;
    for (const auto& pid : record.parent_ids) {
      auto it = store.latest_by_id_.find(pid);
      if (it == store.latest_by_id_.end()) {
        throw Error(ErrorCode::integrity, "provenance.jsonl line " + std::to_string(lineno) +
                                              " names unknown parent " + pid);
      }
      parents.push_back(it->second);
    }
    store.index_record(std::move(record), std::move(parents));
  }
  store.verify();
  return handle;
}

void ArtifactStore::index_record(ArtifactRecord record, std::vector<std::size_t> parents) {
  const std::size_t idx = records_.size();
  latest_by_id_[record.artifact_id] = idx;
  by_slot_[{record.node_id, record.port, record.iteration}] = idx;
  latest_by_port_[{record.node_id, record.port}] = idx;
  records_.push_back(std::move(record));
  parents_.push_back(std::move(parents));
}

ArtifactRecord ArtifactStore::put(const std::string& node, const std::string& port, const IterationVector& iteration,
                                  DataKind kind, const std::string& bytes, const std::vector<std::string>& parents,
                                  std::optional<Responder> responder, std::chrono::system_clock::time_point created) {
  if (bytes.empty()) throw Error(ErrorCode::schema, "artifact payload for " + node + "." + port + " is empty");
  if (kind == DataKind::any) throw Error(ErrorCode::schema, "artifacts need a concrete kind");
  std::unique_lock lock(mutex_);
  if (by_slot_.count({node, port, iteration})) {
    throw Error(ErrorCode::immutability, "artifact " + node + "." + port + " at " + iteration.render() +
                                             " already exists");
  }
  std::vector<std::size_t> parent_idx;
  for (const auto& pid : parents) {
    auto it = latest_by_id_.find(pid);
    if (it == latest_by_id_.end()) throw Error(ErrorCode::provenance, "unknown parent artifact '" + pid + "'");
    parent_idx.push_back(it->second);
  }

  ArtifactRecord record;
  record.artifact_id = sha256_hex(bytes);
  record.run_id = run_id_;
  record.node_id = node;
  record.port = port;
  record.iteration = iteration;
  record.kind = kind;
  record.format = format_for(kind);
  record.created_at = format_timestamp(created);
  record.parent_ids = parents;
  record.responder = responder;

  write_atomic(run_dir_ / artifact_relpath(node, iteration, port, record.format), bytes);
  {
    std::ofstream log(run_dir_ / "provenance.jsonl", std::ios::app);
    if (!log) throw Error(ErrorCode::io, "cannot append to provenance.jsonl");
    log << record.to_json().dump() << '\n';
  }
  index_record(record, std::move(parent_idx));
  return record;
}

std::optional<ArtifactRecord> ArtifactStore::get(const std::string& node, const std::string& port,
                                                 const IterationVector& iteration) const {
  std::shared_lock lock(mutex_);
  auto it = by_slot_.find({node, port, iteration});
  if (it == by_slot_.end()) return std::nullopt;
  return records_[it->second];
}

std::optional<ArtifactRecord> ArtifactStore::latest(const std::string& node, const std::string& port) const {
  std::shared_lock lock(mutex_);
  auto it = latest_by_port_.find({node, port});
  if (it == latest_by_port_.end()) return std::nullopt;
  return records_[it->second];
}

std::size_t ArtifactStore::index_of(const std::string& artifact_id) const {
  auto it = latest_by_id_.find(artifact_id);
  if (it == latest_by_id_.end()) throw Error(ErrorCode::not_found, "unknown artifact '" + artifact_id + "'");
  return it->second;
}

ArtifactRecord ArtifactStore::find(const std::string& artifact_id) const {
  std::shared_lock lock(mutex_);
  return records_[index_of(artifact_id)];
}

bool ArtifactStore::contains(const std::string& artifact_id) const {
  std::shared_lock lock(mutex_);
  return latest_by_id_.count(artifact_id) > 0;
}

ArtifactValue ArtifactStore::load(const ArtifactRecord& record) const {
  ArtifactValue v;
  v.kind = record.kind;
  v.format = record.format;
  v.id = record.artifact_id;
  const fs::path path = run_dir_ / artifact_relpath(record.node_id, record.iteration, record.port, record.format);
  v.path = fs::absolute(path).string();
  v.bytes = read_bytes(path);
  return v;
}

std::vector<ArtifactRecord> ArtifactStore::records() const {
  std::shared_lock lock(mutex_);
  return records_;
}

std::size_t ArtifactStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

std::vector<ArtifactRecord> ArtifactStore::provenance_chain(const std::string& artifact_id) const {
  std::shared_lock lock(mutex_);
  const std::size_t start = index_of(artifact_id);

  std::set<std::size_t> members;
  std::vector<std::size_t> stack{start};
  while (!stack.empty()) {
    const auto idx = stack.back();
    stack.pop_back();
    if (!members.insert(idx).second) continue;
    for (auto p : parents_[idx]) stack.push_back(p);
  }

  // Kahn's algorithm restricted to the ancestor set; parents come first.
  std::map<std::size_t, std::size_t> pending;
  std::map<std::size_t, std::vector<std::size_t>> children;
  for (auto idx : members) {
    std::set<std::size_t> distinct(parents_[idx].begin(), parents_[idx].end());
    pending[idx] = distinct.size();
    for (auto p : distinct) children[p].push_back(idx);
  }
  auto later = [this](std::size_t a, std::size_t b) {
    return std::tie(records_[a].artifact_id, a) > std::tie(records_[b].artifact_id, b);
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> ready(later);
  for (const auto& [idx, n] : pending) {
    if (n == 0) ready.push(idx);
  }
  std::vector<ArtifactRecord> out;
  while (!ready.empty()) {
    const auto idx = ready.top();
    ready.pop();
    out.push_back(records_[idx]);
    for (auto c : children[idx]) {
      if (--pending[c] == 0) ready.push(c);
    }
  }
  return out;
}

void ArtifactStore::verify() const {
  std::shared_lock lock(mutex_);
  for (const auto& r : records_) {
    const fs::path path = run_dir_ / artifact_relpath(r.node_id, r.iteration, r.port, r.format);
    if (!fs::exists(path)) {
      throw Error(ErrorCode::integrity, "artifact file missing: " + path.string());
    }
    if (sha256_hex(read_bytes(path)) != r.artifact_id) {
      throw Error(ErrorCode::integrity, "artifact file does not match its id: " + path.string());
    }
  }
}

}  // namespace labloom
