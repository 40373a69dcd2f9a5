#include "doctest.h"

#include "../support.hpp"
#include "specs.hpp"

#include "labloom/cli.hpp"

#include <cstdlib>
#include <sys/wait.h>

using namespace labloom;
using namespace labloom::test;

TEST_SUITE_BEGIN("cli");

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

struct Cli {
  fs::path root;
  fs::path runs;

  explicit Cli(const std::string& name) : root(fresh_dir(name)), runs(root / "runs") {}

  Outcome operator()(std::vector<std::string> args) const {
    args.insert(args.begin(), {"--runs-dir", runs.string()});
    std::ostringstream out;
    std::ostringstream err;
    Outcome o;
    o.code = run_cli(args, out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
  }

  fs::path spec(const std::string& name, const std::string& xml) const {
    const auto path = root / name;
    write_file(path, xml);
    return path;
  }
};

std::string without_first_line(const std::string& text) { return text.substr(text.find('\n') + 1); }

std::string field(const std::string& text, const std::string& key) {
  const auto at = text.find(key);
  REQUIRE(at != std::string::npos);
  const auto start = at + key.size();
  return text.substr(start, text.find('\n', start) - start);
}

const std::string kEchoSpec = R"(<workflow name="echo" version="1" seed="2">
  <node id="init" kind="Initialiser" plugin="dataset">
    <method name="grid">
      <param name="columns">x,y</param>
      <param name="steps">3</param>
    </method>
  </node>
  <node id="scale" kind="DataProcessing" plugin="echo">
    <method name="scale"/>
    <input port="values" from-node="init" from-port="dataset"/>
  </node>
  <node id="report" kind="Output" plugin="report">
    <method name="collect"/>
    <input port="items" from-node="scale" from-port="values"/>
  </node>
</workflow>
)";

}  // namespace

TEST_CASE("validate reports success, invalid specs and unreadable files") {
  Cli cli("cli-validate");
  auto r = cli({"validate", cli.spec("ok.xml", kSmallSpec).string()});
  CHECK(r.code == kExitOk);
  r = cli({"validate", (cli.root / "missing.xml").string()});
  CHECK(r.code == kExitUsage);
  r = cli({"validate", cli.spec("broken.xml", "<workflow name=").string()});
  CHECK(r.code == kExitFailure);
  CHECK((r.out + r.err).find("line 1") != std::string::npos);
  std::string bad = kSmallSpec;
  bad.replace(bad.find("from-node=\"init\""), 16, "from-node=\"nowhere\"");
  r = cli({"validate", cli.spec("bad.xml", bad).string()});
  CHECK(r.code == kExitFailure);
  CHECK((r.out + r.err).find("nowhere") != std::string::npos);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"run"}).code == kExitUsage);
}

TEST_CASE("the same run twice prints the same summary") {
  Cli cli("cli-repeat");
  const auto spec = cli.spec("small.xml", kSmallSpec).string();
  const auto a = cli({"run", spec, "--seed", "4", "--headless"});
  const auto b = cli({"run", spec, "--seed", "4", "--headless"});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  CHECK(a.out.rfind("run_id: ", 0) == 0);
  CHECK(field(a.out, "run_id: ") != field(b.out, "run_id: "));
  CHECK(without_first_line(a.out) == without_first_line(b.out));
  CHECK(field(a.out, "phase: ") == "completed");
  CHECK(a.out.find("output report.report: ") != std::string::npos);
  const auto c = cli({"run", spec, "--seed", "5", "--headless"});
  CHECK(field(c.out, "artifact_digest: ") != field(a.out, "artifact_digest: "));
}

TEST_CASE("an unknown plugin fails before anything runs") {
  Cli cli("cli-unknown");
  std::string bad = kSmallSpec;
  bad.replace(bad.find("random-search"), 13, "ghost");
  const auto r = cli({"run", cli.spec("bad.xml", bad).string(), "--headless"});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("ghost") != std::string::npos);
  CHECK((!fs::exists(cli.runs) || fs::is_empty(cli.runs)));
}

TEST_CASE("external plugins join the registry and failures name the node") {
  Cli cli("cli-external");
  const auto spec = cli.spec("echo.xml", kEchoSpec).string();
  CHECK(cli({"validate", spec}).code == kExitFailure);
  CHECK(cli({"--plugin", LABLOOM_ECHO_PLUGIN, "validate", spec}).code == kExitOk);
  const auto r = cli({"--plugin", LABLOOM_ECHO_PLUGIN, "run", spec, "--run-id", "echo-run"});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("run failed at node scale") != std::string::npos);
  const auto status = cli({"--plugin", LABLOOM_ECHO_PLUGIN, "status", (cli.runs / "echo-run").string()});
  CHECK(status.code == kExitOk);
  CHECK(status.out.find("phase=failed") != std::string::npos);
  CHECK(status.out.find("failure=scale") != std::string::npos);
  CHECK(cli({"--plugin", (cli.root / "no-such-plugin").string(), "validate", spec}).code != kExitOk);
}

TEST_CASE("export flattens scalar artifacts") {
  Cli cli("cli-export");
  const auto spec = cli.spec("small.xml", kSmallSpec).string();
  REQUIRE(cli({"run", spec, "--headless", "--run-id", "done"}).code == kExitOk);
  const auto dir = (cli.runs / "done").string();
  auto r = cli({"export", dir});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.rfind("node,port,iteration,value\n", 0) == 0);
  r = cli({"export", dir, "--format", "json"});
  REQUIRE(r.code == kExitOk);
  CHECK(json::parse(r.out).is_array());
  const auto file = cli.root / "export.csv";
  r = cli({"export", dir, "--out", file.string()});
  CHECK(r.code == kExitOk);
  CHECK(read_file(file).rfind("node,port,iteration,value\n", 0) == 0);
  CHECK(cli({"export", dir, "--format", "xml"}).code == kExitUsage);
  CHECK(cli({"export", (cli.runs / "nope").string()}).code == kExitUsage);
}

TEST_CASE("a demo export has one instability row per analysis pass") {
  Cli cli("cli-demo-export");
  const auto spec = (demo_dir("case_a") / "workflow.xml").string();
  REQUIRE(cli({"run", spec, "--headless", "--seed", "7", "--run-id", "a"}).code == kExitOk);
  const auto dir = cli.runs / "a";
  const auto status = cli({"status", dir.string()});
  CHECK(status.out.find("phase=completed") != std::string::npos);

  std::size_t passes = 0;
  std::istringstream events(read_file(dir / "events.jsonl"));
  for (std::string line; std::getline(events, line);) {
    const auto e = json::parse(line);
    if (e.at("type") == "node-finished" && e.value("node_id", "") == "analysis") ++passes;
  }
  const auto table = json::parse(cli({"export", dir.string(), "--format", "json"}).out);
  std::size_t rows = 0;
  for (const auto& row : table) rows += row.at("node") == "analysis" ? 1 : 0;
  CHECK(passes >= 3);
  CHECK(rows == passes);
}

TEST_CASE("paused runs are answered, patched and resumed from the shell") {
  Cli cli("cli-pause");
  const auto spec = cli.spec("review.xml", kReviewSpec).string();
  auto r = cli({"run", spec, "--run-id", "rv", "--pause-at-interaction"});
  REQUIRE(r.code == kExitOk);
  CHECK(field(r.out, "phase: ") == "paused");
  CHECK(r.out.find("pending req-1 approve-suggestions at review") != std::string::npos);
  const auto dir = (cli.runs / "rv").string();

  CHECK(cli({"status", dir}).out.find("pending req-1") != std::string::npos);
  CHECK(cli({"patch", dir, "pick", "propose.batch_size", "1"}).code == kExitOk);
  CHECK(cli({"patch", dir, "pick", "propose.nope", "1"}).code == kExitFailure);
  CHECK(cli({"answer", dir, "req-9", "null"}).code == kExitFailure);
  r = cli({"answer", dir, "req-1", R"({"accepted":[0,1]})"});
  REQUIRE(r.code == kExitOk);
  const auto checkpoint = field(r.out, "checkpoint: ");

  r = cli({"resume", checkpoint, "--pause-at-interaction"});
  REQUIRE(r.code == kExitOk);
  CHECK(field(r.out, "phase: ") == "paused");
  r = cli({"resume", field(r.out, "checkpoint: "), "--headless"});
  REQUIRE(r.code == kExitOk);
  CHECK(field(r.out, "phase: ") == "completed");

  auto engine = make_engine(cli.runs);
  const auto id = engine->open_run(cli.runs / "rv");
  CHECK(latest_table(engine->store(id), "keep", "history").rows() == 2 + 1);
}

TEST_CASE("answering a finished run is stale") {
  Cli cli("cli-stale");
  const auto spec = cli.spec("review.xml", kReviewSpec).string();
  REQUIRE(cli({"run", spec, "--headless", "--run-id", "fin"}).code == kExitOk);
  const auto r = cli({"answer", (cli.runs / "fin").string(), "req-1", "null"});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("stale") != std::string::npos);
}

TEST_CASE("the installed tool honours LABLOOM_RUNS_DIR and exit codes") {
  Cli cli("cli-binary");
  const auto spec = cli.spec("small.xml", kSmallSpec).string();
  const auto runs = cli.root / "env-runs";
  const auto shell = [](const std::string& command) {
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const std::string tool = std::string("'") + LABLOOM_CLI + "'";
  CHECK(shell("LABLOOM_RUNS_DIR='" + runs.string() + "' " + tool + " run '" + spec +
              "' --headless --run-id env > /dev/null") == kExitOk);
  CHECK(fs::exists(runs / "env" / "spec.xml"));
  CHECK(shell(tool + " validate /nonexistent.xml 2> /dev/null") == kExitUsage);
}

TEST_SUITE_END();
