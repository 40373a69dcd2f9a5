#include "doctest.h"

#include "../support.hpp"

#include "labloom/datastore.hpp"
#include "labloom/error.hpp"
#include "labloom/hash.hpp"

using namespace labloom;
using namespace labloom::test;

TEST_SUITE_BEGIN("datastore");

namespace {

IterationVector iter(std::size_t k) { return IterationVector{{{"loop", k}}}; }

ErrorCode put_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::io;
}

}  // namespace

TEST_CASE("artifacts are content addressed and stored under their slot") {
  const auto dir = fresh_dir("store-put");
  ArtifactStore store(dir, "r1");
  const auto rec = store.put("n", "out", iter(0), DataKind::scalar, "1.5", {});
  CHECK(rec.artifact_id == sha256_hex("1.5"));
  CHECK(rec.format == Format::json);
  CHECK(read_file(dir / artifact_relpath("n", iter(0), "out", Format::json)) == "1.5");
  CHECK(store.get("n", "out", iter(0)) == rec);
  CHECK_FALSE(store.get("n", "out", iter(1)));
  CHECK(store.load(rec).value() == 1.5);
  CHECK(store.contains(rec.artifact_id));
  CHECK(store.find(rec.artifact_id) == rec);
}

TEST_CASE("tabular kinds are stored as CSV") {
  const auto dir = fresh_dir("store-csv");
  ArtifactStore store(dir, "r1");
  const auto rec = store.put("n", "t", {}, DataKind::table, "a,b\n1,2\n", {});
  CHECK(rec.format == Format::csv);
  CHECK(fs::exists(dir / "artifacts" / "n" / "root" / "t.csv"));
  CHECK(store.load(rec).table().number(0, 1) == 2.0);
}

TEST_CASE("store rejects empty payloads, occupied slots and unknown parents") {
  const auto dir = fresh_dir("store-errors");
  ArtifactStore store(dir, "r1");
  store.put("n", "out", iter(0), DataKind::scalar, "1", {});
  CHECK(put_code([&] { store.put("n", "e", iter(0), DataKind::scalar, "", {}); }) == ErrorCode::schema);
  CHECK(put_code([&] { store.put("n", "out", iter(0), DataKind::scalar, "2", {}); }) == ErrorCode::immutability);
  CHECK(put_code([&] { store.put("n", "x", iter(0), DataKind::scalar, "3", {"feed"}); }) == ErrorCode::provenance);
  CHECK(put_code([&] { store.find("missing"); }) == ErrorCode::not_found);
  CHECK(store.size() == 1);
}

TEST_CASE("latest follows creation order and parents resolve to earlier records") {
  const auto dir = fresh_dir("store-latest");
  ArtifactStore store(dir, "r1");
  const auto a = store.put("src", "v", iter(0), DataKind::scalar, "1", {});
  const auto b = store.put("mid", "v", iter(0), DataKind::scalar, "2", {a.artifact_id});
  const auto c = store.put("src", "v", iter(1), DataKind::scalar, "3", {});
  const auto d = store.put("end", "v", {}, DataKind::scalar, "4", {b.artifact_id, c.artifact_id});
  CHECK(store.latest("src", "v")->artifact_id == c.artifact_id);
  const auto chain = store.provenance_chain(d.artifact_id);
  std::vector<std::string> ids;
  for (const auto& r : chain) ids.push_back(r.artifact_id);
  REQUIRE(ids.size() == 4);
  CHECK(ids.back() == d.artifact_id);
  // every ancestor precedes its children
  const auto pos = [&](const std::string& id) { return std::find(ids.begin(), ids.end(), id) - ids.begin(); };
  CHECK(pos(a.artifact_id) < pos(b.artifact_id));
  CHECK(pos(b.artifact_id) < pos(d.artifact_id));
  CHECK(pos(c.artifact_id) < pos(d.artifact_id));
}

TEST_CASE("same bytes in two slots keep one id and an acyclic graph") {
  const auto dir = fresh_dir("store-dup");
  ArtifactStore store(dir, "r1");
  const auto a = store.put("n", "v", iter(0), DataKind::scalar, "7", {});
  const auto b = store.put("n", "v", iter(1), DataKind::scalar, "7", {a.artifact_id});
  CHECK(a.artifact_id == b.artifact_id);
  CHECK(store.provenance_chain(b.artifact_id).size() == 2);
}

TEST_CASE("reopening verifies provenance and payload hashes") {
  const auto dir = fresh_dir("store-open");
  {
    ArtifactStore store(dir, "r1");
    const auto a = store.put("n", "v", iter(0), DataKind::scalar, "1", {});
    store.put("n", "w", iter(0), DataKind::table, "x\n1\n", {a.artifact_id}, Responder::human);
  }
  auto reopened = ArtifactStore::open(dir, "r1");
  CHECK(reopened->size() == 2);
  CHECK(reopened->records()[1].responder == Responder::human);
  reopened->verify();

  write_file(dir / artifact_relpath("n", iter(0), "w", Format::csv), "x\n2\n");
  CHECK_THROWS_AS(ArtifactStore::open(dir, "r1"), Error);
}

TEST_CASE("artifact records round-trip through JSON") {
  ArtifactRecord r;
  r.artifact_id = "abc";
  r.run_id = "r";
  r.node_id = "n";
  r.port = "p";
  r.iteration = iter(2);
  r.kind = DataKind::decision;
  r.created_at = "2026-01-01T00:00:00.000Z";
  r.parent_ids = {"x", "y"};
  r.responder = Responder::timeout_default;
  const auto j = r.to_json();
  CHECK(j.at("responder") == "timeout-default");
  CHECK(ArtifactRecord::from_json(j) == r);
}

TEST_CASE("timestamps are ISO-8601 UTC with milliseconds") {
  const auto t = std::chrono::system_clock::time_point(std::chrono::milliseconds(1700000000123));
  CHECK(format_timestamp(t) == "2023-11-14T22:13:20.123Z");
}

TEST_CASE("folder sources pick matching files in name order") {
  const auto dir = fresh_dir("folder");
  write_file(dir / "data" / "b.csv", "x\n2\n");
  write_file(dir / "data" / "a.csv", "x\n1\n");
  write_file(dir / "data" / "notes.txt", "ignore");
  write_file(dir / "data" / "s.json", "{ \"k\": 1 }");
  const auto files = read_folder(dir, FolderSource{"data", "*.csv", Format::csv});
  REQUIRE(files.size() == 2);
  CHECK(files[0].stem == "a");
  CHECK(files[1].bytes == "x\n2\n");
  CHECK(read_folder(dir, FolderSource{"data", "*.json", Format::json})[0].bytes == "{\"k\":1}");
  CHECK(folder_port(FolderSource{"data", "*.csv", Format::csv}, "a") == "data_a");
  CHECK_THROWS_AS(read_folder(dir, FolderSource{"data", "*.xml", Format::csv}), Error);
  CHECK_THROWS_AS(read_folder(dir, FolderSource{"none", "*", Format::csv}), Error);
  write_file(dir / "bad" / "x.json", "{oops");
  CHECK_THROWS_AS(read_folder(dir, FolderSource{"bad", "*.json", Format::json}), Error);
}

TEST_CASE("datasets apply their sidecar and detect the problem") {
  Table t({"id", "x", "label", "note"});
  t.add_row({"1", "0.5", "1", "ok"});
  t.add_row({"2", "0.7", "0", "meh"});
  const json schema = {{"columns",
                        {{{"name", "id"}, {"role", "id"}, {"type", "integer"}},
                         {{"name", "x"}, {"role", "feature"}},
                         {{"name", "label"}, {"role", "target"}, {"type", "integer"}}}},
                       {"partitions", {{"train", {0}}, {"test", {1}}}}};
  const auto d = Dataset::from(t, schema);
  CHECK(d.columns[3].role == ColumnRole::meta);
  CHECK(d.names_with(ColumnRole::feature) == std::vector<std::string>{"x"});
  const auto ctx = detect_problem_context(d);
  CHECK(ctx.supervised);
  CHECK(ctx.target_columns == std::vector<std::string>{"label"});
  CHECK(ctx.has_partitions);
  CHECK(ProblemContext::from_json(ctx.to_json()) == ctx);
  CHECK(Dataset::from(t, d.schema_json()).columns == d.columns);

  json overlap = schema;
  overlap["partitions"]["test"] = {0};
  CHECK_THROWS_AS(Dataset::from(t, overlap), Error);
  json two_ids = schema;
  two_ids["columns"][1]["role"] = "id";
  CHECK_THROWS_AS(Dataset::from(t, two_ids), Error);
  json missing = schema;
  missing["columns"].push_back({{"name", "ghost"}});
  CHECK_THROWS_AS(Dataset::from(t, missing), Error);
  Table frac({"k"});
  frac.add_row({"1.5"});
  CHECK_THROWS_AS(Dataset::from(frac, {{"columns", {{{"name", "k"}, {"type", "integer"}}}}}), Error);
}

TEST_SUITE_END();
