#include "common.hpp"

#include <cmath>

namespace labloom::builtin {

namespace {

std::optional<double> timeout_of(const InvokeRequest& req) {
  const double t = req.param<double>("timeout_s");
  if (t < 0.0) return std::nullopt;
  return t;
}

/// Summary of the campaign so far, shown next to a terminate decision.
InvokeResult progress_show(const InvokeRequest& req) {
  const auto target = req.param<std::string>("target");
  const bool maximize = req.param<std::string>("sense") == "maximize";
  json summary = {{"n", 0}, {"target", target}};
  if (const auto* d = req.input("data")) {
    const Table t = d->table();
    summary["n"] = t.rows();
    if (t.has_column(target) && t.rows() > 0) {
      const auto values = t.column_values(target);
      double best = values.front();
      for (double v : values) best = maximize ? std::max(best, v) : std::min(best, v);
      summary["best"] = best;
      summary["last"] = values.back();
    }
  }
  InvokeResult res;
  res.outputs["summary"] = ArtifactValue::of_json(DataKind::document, summary);
  return res;
}

InvokeResult suggestion_review(const InvokeRequest& req) {
  const auto& batch = first_input(req, "batch");
  InvokeResult res;
  res.outputs["proposed"] = ArtifactValue::of_table(DataKind::candidate_set, batch.table());
  InteractionSpec ask;
  ask.kind = "approve-suggestions";
  ask.prompt = req.param<std::string>("prompt");
  ask.answer_port = "approved";
  ask.default_action = nullptr;  // accept every suggestion
  ask.payload_ports = {"proposed"};
  ask.timeout_s = timeout_of(req);
  res.interaction = ask;
  return res;
}

InvokeResult label_prompt(const InvokeRequest& req) {
  const auto& item = first_input(req, "item");
  InvokeResult res;
  res.outputs["shown"] = ArtifactValue::of_table(DataKind::candidate_set, item.table());
  InteractionSpec ask;
  ask.kind = "label-item";
  ask.prompt = req.param<std::string>("prompt");
  ask.answer_port = "label";
  ask.default_action = req.param<long long>("default_label");
  ask.payload_ports = {"shown"};
  ask.timeout_s = timeout_of(req);
  res.interaction = ask;
  return res;
}

InvokeResult config_prompt(const InvokeRequest& req) {
  InvokeResult res;
  json shown = json::object();
  for (const auto& [port, values] : req.inputs) {
    for (const auto& v : values) shown[port].push_back(v.id);
  }
  res.outputs["context"] = ArtifactValue::of_json(DataKind::document, shown);
  InteractionSpec ask;
  ask.kind = "edit-config";
  ask.prompt = req.param<std::string>("prompt");
  ask.answer_port = "decision";
  ask.default_action = nullptr;  // keep the configuration
  ask.payload_ports = {"context"};
  ask.timeout_s = timeout_of(req);
  res.interaction = ask;
  return res;
}

}  // namespace

void register_ui_plugins(PluginRegistry& registry) {
  registry.register_plugin(
      PluginDescriptor{"progress-view",
                       ModuleKind::user_interaction,
                       {MethodSpec{"show",
                                   {text_param("target", "y"),
                                    enum_param("sense", {"minimize", "maximize"}, "minimize")},
                                   {in_port("data", DataKind::table, true)},
                                   {out_port("summary", DataKind::document)}}}},
      progress_show);

  registry.register_plugin(
      PluginDescriptor{"suggestion-review",
                       ModuleKind::user_interaction,
                       {MethodSpec{"review",
                                   {text_param("prompt", "Approve or edit the proposed batch"),
                                    num_param("timeout_s", -1.0)},
                                   {in_port("batch", DataKind::candidate_set)},
                                   {out_port("proposed", DataKind::candidate_set),
                                    out_port("approved", DataKind::candidate_set)}}}},
      suggestion_review);

  registry.register_plugin(
      PluginDescriptor{"label-prompt",
                       ModuleKind::user_interaction,
                       {MethodSpec{"ask",
                                   {text_param("prompt", "Label this item (0 or 1)"), int_param("default_label", 0),
                                    num_param("timeout_s", -1.0)},
                                   {in_port("item", DataKind::candidate_set)},
                                   {out_port("shown", DataKind::candidate_set), out_port("label", DataKind::label)}}}},
      label_prompt);

  registry.register_plugin(
      PluginDescriptor{"config-prompt",
                       ModuleKind::user_interaction,
                       {MethodSpec{"ask",
                                   {text_param("prompt", "Adjust any plugin parameter before continuing"),
                                    num_param("timeout_s", -1.0)},
                                   {in_port("context", DataKind::any, true)},
                                   {out_port("context", DataKind::document), out_port("decision", DataKind::decision)}}}},
      config_prompt);
}

}  // namespace labloom::builtin
