#include "labloom/service.hpp"

#include "labloom/error.hpp"

#include "httplib.h"

#include <fstream>

namespace labloom {

ApiError api_error(const Error& error) {
  switch (error.code()) {
    case ErrorCode::not_found: return {404, "not-found", error.what()};
    case ErrorCode::conflict: return {409, "conflict", error.what()};
    case ErrorCode::stale: return {410, "gone", error.what()};
    default: return {400, "invalid", error.what()};
  }
}

std::pair<std::string, int> parse_address(const std::string& address) {
  std::string host = "127.0.0.1";
  std::string port = address;
  if (const auto colon = address.rfind(':'); colon != std::string::npos) {
    if (colon > 0) host = address.substr(0, colon);
    port = address.substr(colon + 1);
  }
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::invalid_argument(port);
    return {host, p};
  } catch (const std::exception&) {
    throw Error(ErrorCode::schema, "invalid address '" + address + "', expected host:port");
  }
}

WorkflowSpec headless_spec(WorkflowSpec spec) {
  for (auto& loop : spec.loops) {
    if (auto* d = std::get_if<UserDecision>(&loop.condition)) d->timeout_s = 0.0;
  }
  for (auto& node : spec.nodes) {
    if (node.kind != ModuleKind::user_interaction) continue;
    for (auto& m : node.methods) {
      for (auto& [name, value] : m.params) {
        if (name == "timeout_s") value = "0";
      }
    }
  }
  return spec;
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) { send_json(res, e.to_json(), e.status); }

/// Runs a handler, mapping engine errors to API errors.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    send_error(res, api_error(e));
  } catch (const json::exception& e) {
    send_error(res, {400, "invalid", std::string("malformed JSON: ") + e.what()});
  } catch (const std::exception& e) {
    send_error(res, {500, "internal", e.what()});
  }
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

std::string sse_frame(const EngineEvent& e) {
  return "id: " + std::to_string(e.index) + "\nevent: " + e.type + "\ndata: " + e.to_json().dump() + "\n\n";
}

}  // namespace

ControlService::ControlService(Engine& engine, ServiceOptions options)
    : engine_(engine), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ControlService::~ControlService() { stop(); }

int ControlService::start(const std::string& host, int port) {
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw Error(ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void ControlService::stop() {
  stopping_ = true;
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void ControlService::install_routes() {
  auto& s = *server_;
  s.set_keep_alive_max_count(100);

  s.Get("/api/runs", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      json list = json::array();
      for (const auto& id : engine_.list_runs()) {
        const auto snap = engine_.snapshot(id);
        list.push_back({{"run_id", snap->run_id},
                        {"workflow", snap->workflow},
                        {"phase", std::string(to_string(snap->phase))},
                        {"event_count", snap->event_count}});
      }
      send_json(res, list);
    });
  });

  s.Post("/api/runs", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::string xml;
      StartOptions start;
      start.base_dir = options_.base_dir;
      bool headless = options_.headless;
      const auto type = req.get_header_value("Content-Type");
      if (type.find("json") != std::string::npos) {
        const json body = parse_body(req);
        xml = body.at("spec").get<std::string>();
        if (body.contains("seed") && !body.at("seed").is_null()) start.seed = body.at("seed").get<std::uint64_t>();
        start.run_id = body.value("run_id", std::string());
        headless = body.value("headless", headless);
      } else {
        xml = req.body;
        if (req.has_param("seed")) start.seed = std::stoull(req.get_param_value("seed"));
        if (req.has_param("run_id")) start.run_id = req.get_param_value("run_id");
      }
      WorkflowSpec spec = parse_workflow(xml);
      if (headless) {
        spec = headless_spec(std::move(spec));
        start.default_timeout_s = 0.0;
      }
      const auto id = engine_.start_run(spec, start);
      engine_.launch(id);
      send_json(res, {{"run_id", id}}, 201);
    });
  });

  s.Get(R"(/api/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, engine_.snapshot(req.matches[1])->to_json()); });
  });

  s.Post(R"(/api/runs/([^/]+)/pause)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto c = engine_.pause(req.matches[1]);
      send_json(res, {{"phase", "paused"}, {"checkpoint", c.index}, {"content_hash", c.content_hash}});
    });
  });

  s.Post(R"(/api/runs/([^/]+)/resume)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      engine_.resume(id);
      engine_.launch(id);
      send_json(res, {{"phase", std::string(to_string(engine_.snapshot(id)->phase))}});
    });
  });

  s.Post(R"(/api/runs/([^/]+)/patches)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      engine_.patch_config(id, ConfigPatch::from_json(parse_body(req)));
      const auto snap = engine_.snapshot(id);
      send_json(res, {{"ok", true}, {"patch", snap->patch_log.back().to_json()}});
    });
  });

  s.Get(R"(/api/runs/([^/]+)/interactions)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      json list = json::array();
      for (const auto& r : engine_.snapshot(req.matches[1])->pending_interactions) list.push_back(r.to_json());
      send_json(res, list);
    });
  });

  s.Post(R"(/api/runs/([^/]+)/interactions/([^/]+)/answer)",
         [this](const httplib::Request& req, httplib::Response& res) {
           guarded(res, [&] {
             const json body = parse_body(req);
             if (!body.is_object() || !body.contains("answer")) {
               throw Error(ErrorCode::schema, "body must be {\"answer\": ...}");
             }
             Responder responder = Responder::human;
             if (body.contains("responder")) {
               const auto r = parse_responder(body.at("responder").get<std::string>());
               if (!r) throw Error(ErrorCode::schema, "unknown responder");
               responder = *r;
             }
             engine_.answer_interaction(req.matches[1], req.matches[2], body.at("answer"), responder);
             send_json(res, {{"ok", true}});
           });
         });

  s.Get(R"(/api/runs/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      engine_.snapshot(id);  // not-found check before streaming
      std::size_t since = 0;
      if (req.has_param("since")) {
        since = std::stoull(req.get_param_value("since"));
      } else if (req.has_header("Last-Event-ID")) {
        since = std::stoull(req.get_header_value("Last-Event-ID"));
      }
      res.set_header("Cache-Control", "no-cache");
      auto cursor = std::make_shared<std::size_t>(since);
      res.set_chunked_content_provider("text/event-stream", [this, id, cursor](std::size_t, httplib::DataSink& sink) {
        while (!stopping_) {
          const auto batch = engine_.wait_events(id, *cursor, std::chrono::milliseconds(200));
          for (const auto& e : batch) {
            const auto frame = sse_frame(e);
            if (!sink.write(frame.data(), frame.size())) return false;
            *cursor = e.index;
          }
          const auto snap = engine_.snapshot(id);
          const bool finished = snap->phase == Phase::completed || snap->phase == Phase::failed;
          if (finished && *cursor >= snap->event_count) {
            sink.done();
            return true;
          }
          if (!sink.is_writable()) return false;
          if (batch.empty()) {
            static const std::string keepalive = ": keep-alive\n\n";
            if (!sink.write(keepalive.data(), keepalive.size())) return false;
          }
        }
        sink.done();
        return true;
      });
    });
  });

  s.Get(R"(/api/runs/([^/]+)/artifacts/([^/]+)/([^/]+)/([^/]+))",
        [this](const httplib::Request& req, httplib::Response& res) {
          guarded(res, [&] {
            const auto& store = engine_.store(req.matches[1]);
            const auto rec = store.get(req.matches[2], req.matches[4], IterationVector::parse(req.matches[3]));
            if (!rec) throw Error(ErrorCode::not_found, "no artifact at that slot");
            const auto value = store.load(*rec);
            json parents = rec->parent_ids;
            res.set_header("X-Artifact-Id", rec->artifact_id);
            res.set_header("X-Artifact-Kind", std::string(to_string(rec->kind)));
            res.set_header("X-Artifact-Format", std::string(to_string(rec->format)));
            res.set_header("X-Artifact-Created-At", rec->created_at);
            res.set_header("X-Artifact-Record", rec->to_json().dump());
            res.set_content(value.bytes, rec->format == Format::csv ? "text/csv" : "application/json");
          });
        });

  s.Get(R"(/api/runs/([^/]+)/artifacts)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      json list = json::array();
      for (const auto& r : engine_.store(req.matches[1]).records()) list.push_back(r.to_json());
      send_json(res, list);
    });
  });

  s.Get(R"(/api/runs/([^/]+)/spec)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::ifstream in(engine_.run_dir(req.matches[1]) / "spec.xml");
      std::string xml((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      res.set_content(xml, "application/xml");
    });
  });

  s.Get("/api/plugins", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      json list = json::array();
      for (const auto& d : engine_.registry().list()) {
        json methods = json::array();
        for (const auto& m : d.methods) {
          json params = json::array();
          for (const auto& p : m.params) {
            json pj = {{"name", p.name}, {"type", std::string(to_string(p.type))}, {"required", p.required}};
            if (p.default_value) pj["default"] = *p.default_value;
            if (!p.values.empty()) pj["values"] = p.values;
            params.push_back(pj);
          }
          methods.push_back({{"name", m.name}, {"params", params}});
        }
        list.push_back({{"name", d.name}, {"kind", std::string(to_string(d.module_kind))}, {"methods", methods}});
      }
      send_json(res, list);
    });
  });

  if (!options_.static_dir.empty()) s.set_mount_point("/", options_.static_dir.string());
}

}  // namespace labloom
