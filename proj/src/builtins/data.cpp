#include "common.hpp"

#include "labloom/datastore.hpp"
#include "labloom/ml/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace labloom::builtin {

namespace {

InvokeResult dataset_outputs(const Dataset& d) {
  InvokeResult r;
  r.outputs["dataset"] = ArtifactValue::of_table(DataKind::table, d.rows);
  r.outputs["context"] = ArtifactValue::of_json(DataKind::context, detect_problem_context(d).to_json());
  r.outputs["schema"] = ArtifactValue::of_json(DataKind::document, d.schema_json());
  r.diagnostics["rows"] = d.rows.rows();
  return r;
}

std::vector<PortSpec> dataset_ports() {
  return {out_port("dataset", DataKind::table), out_port("context", DataKind::context),
          out_port("schema", DataKind::document)};
}

InvokeResult dataset_load(const InvokeRequest& req) {
  const Table table = merged_table(req, "data");
  json schema = json::object();
  if (const auto* s = req.input("schema")) schema = s->value();
  return dataset_outputs(Dataset::from(table, schema));
}

/// Full factorial grid; with `simplex` only points whose coordinates sum to at most hi.
InvokeResult dataset_grid(const InvokeRequest& req) {
  const auto names = split_list(req.param<std::string>("columns"));
  const auto steps = req.param<long long>("steps");
  const double lo = req.param<double>("lo");
  const double hi = req.param<double>("hi");
  const bool simplex = req.param<bool>("simplex");
  if (names.empty()) throw Error(ErrorCode::domain, "grid needs at least one column");
  if (steps < 2 || !(hi > lo)) throw Error(ErrorCode::domain, "grid needs steps >= 2 and hi > lo");
  if (simplex && lo != 0.0) throw Error(ErrorCode::domain, "a simplex grid starts at lo = 0");
  Table table(names);
  std::vector<long long> idx(names.size(), 0);
  for (;;) {
    std::vector<double> row;
    long long sum = 0;
    for (auto k : idx) {
      // Exact lattice values so that the simplex test does not suffer from rounding.
      row.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1));
      sum += k;
    }
    if (!simplex || sum <= steps - 1) table.add_numeric_row(row);
    std::size_t d = names.size();
    while (d > 0 && ++idx[d - 1] == steps) idx[--d] = 0;
    if (d == 0) break;
  }
  json schema = {{"columns", json::array()}};
  for (const auto& n : names) schema["columns"].push_back({{"name", n}, {"role", "feature"}});
  return dataset_outputs(Dataset::from(table, schema));
}

/// Empty table with declared features and an optional target.
InvokeResult dataset_declare(const InvokeRequest& req) {
  const auto features = split_list(req.param<std::string>("features"));
  const auto target = req.param<std::string>("target");
  auto columns = features;
  json schema = {{"columns", json::array()}};
  for (const auto& n : features) schema["columns"].push_back({{"name", n}, {"role", "feature"}});
  if (!target.empty()) {
    columns.push_back(target);
    schema["columns"].push_back({{"name", target}, {"role", "target"}});
  }
  return dataset_outputs(Dataset::from(Table(columns), schema));
}

InvokeResult binarize_column(const InvokeRequest& req) {
  Table t = first_input(req, "table").table();
  const auto column = req.param<std::string>("column");
  auto out_name = req.param<std::string>("output_column");
  if (out_name.empty()) out_name = column + "_bin";
  if (!t.has_column(column)) throw Error(ErrorCode::domain, "table has no column '" + column + "'");
  const auto bits = ml::binarize(t.column_values(column), req.param<double>("threshold"));
  auto columns = t.columns();
  const bool replace = t.has_column(out_name);
  if (!replace) columns.push_back(out_name);
  Table out(columns);
  const auto oc = replace ? t.column_index(out_name) : t.cols();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    std::vector<std::string> row;
    for (std::size_t c = 0; c < t.cols(); ++c) row.push_back(t.cell(r, c));
    if (replace) {
      row[oc] = std::to_string(bits[r]);
    } else {
      row.push_back(std::to_string(bits[r]));
    }
    out.add_row(std::move(row));
  }
  InvokeResult res;
  res.outputs["table"] = ArtifactValue::of_table(DataKind::table, out);
  return res;
}

InvokeResult standardize_columns(const InvokeRequest& req) {
  const Table t = first_input(req, "table").table();
  auto names = split_list(req.param<std::string>("columns"));
  if (names.empty()) names = t.columns();
  std::map<std::string, std::vector<std::string>> replaced;
  json scaling = {{"mean", json::object()}, {"std", json::object()}};
  for (const auto& n : names) {
    if (!t.has_column(n)) throw Error(ErrorCode::domain, "table has no column '" + n + "'");
    const auto s = ml::standardize(t.column_values(n));
    auto& cells = replaced[n];
    for (double v : s.values) cells.push_back(format_number(v));
    scaling["mean"][n] = s.mean;
    scaling["std"][n] = s.std;
  }
  Table out(t.columns());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    std::vector<std::string> row;
    for (std::size_t c = 0; c < t.cols(); ++c) {
      auto it = replaced.find(t.columns()[c]);
      row.push_back(it != replaced.end() ? it->second[r] : t.cell(r, c));
    }
    out.add_row(std::move(row));
  }
  InvokeResult res;
  res.outputs["table"] = ArtifactValue::of_table(DataKind::table, out);
  res.outputs["scaling"] = ArtifactValue::of_json(DataKind::document, scaling);
  return res;
}

/// Appends rows of `x` joined with the target values of `y` to the history
/// (or to `base` when no history exists yet).
InvokeResult accumulate_append(const InvokeRequest& req) {
  const auto target = req.param<std::string>("target");
  const Table x = merged_table(req, "x");
  const ArtifactValue& yv = first_input(req, "y");
  std::vector<std::string> values;
  if (yv.format == Format::csv) {
    const Table y = yv.table();
    std::string col = target;
    if (!y.has_column(col)) {
      if (y.cols() != 1) throw Error(ErrorCode::domain, "y table has no column '" + target + "'");
      col = y.columns().front();
    }
    for (double v : y.column_values(col)) values.push_back(format_number(v));
  } else {
    const json v = yv.value();
    if (!v.is_number() && !v.is_boolean()) throw Error(ErrorCode::domain, "y must be a number or a table");
    values.assign(x.rows(), format_number(v.is_boolean() ? (v.get<bool>() ? 1.0 : 0.0) : v.get<double>()));
  }
  if (values.size() != x.rows()) {
    throw Error(ErrorCode::domain, "x has " + std::to_string(x.rows()) + " rows but y has " +
                                       std::to_string(values.size()) + " values");
  }
  auto columns = x.columns();
  columns.push_back(target);

  std::optional<Table> previous;
  if (const auto* h = req.input("history")) {
    previous = h->table();
  } else if (const auto* b = req.input("base")) {
    previous = b->table();
  }
  Table out(columns);
  if (previous) {
    for (const auto& c : columns) {
      if (!previous->has_column(c)) throw Error(ErrorCode::domain, "history has no column '" + c + "'");
    }
    for (std::size_t r = 0; r < previous->rows(); ++r) {
      std::vector<std::string> row;
      for (const auto& c : columns) row.push_back(previous->cell(r, previous->column_index(c)));
      out.add_row(std::move(row));
    }
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::vector<std::string> row;
    for (std::size_t c = 0; c < x.cols(); ++c) row.push_back(x.cell(r, c));
    row.push_back(values[r]);
    out.add_row(std::move(row));
  }
  InvokeResult res;
  res.outputs["history"] = ArtifactValue::of_table(DataKind::table, out);
  res.diagnostics["rows"] = out.rows();
  return res;
}

json artifact_summary(const ArtifactValue& v) {
  json item = {{"id", v.id}, {"kind", std::string(to_string(v.kind))}};
  if (v.format == Format::csv) {
    const Table t = v.table();
    item["columns"] = t.columns();
    item["rows"] = t.rows();
  } else {
    item["value"] = v.value();
  }
  return item;
}

InvokeResult report_collect(const InvokeRequest& req) {
  json report = {{"items", json::object()}};
  for (const auto& [port, values] : req.inputs) {
    auto& list = report["items"][port];
    list = json::array();
    for (const auto& v : values) list.push_back(artifact_summary(v));
  }
  InvokeResult res;
  res.outputs["report"] = ArtifactValue::of_json(DataKind::document, report);
  return res;
}

/// Best row of a history table by the target column.
InvokeResult report_best(const InvokeRequest& req) {
  const Table t = merged_table(req, "history");
  const auto target = req.param<std::string>("target");
  const bool maximize = req.param<std::string>("sense") == "maximize";
  if (!t.has_column(target)) throw Error(ErrorCode::domain, "history has no column '" + target + "'");
  json report = {{"n", t.rows()}, {"target", target}, {"sense", maximize ? "maximize" : "minimize"}};
  if (t.rows() > 0) {
    const auto values = t.column_values(target);
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
      if (maximize ? values[i] > values[best] : values[i] < values[best]) best = i;
    }
    json row = json::object();
    for (std::size_t c = 0; c < t.cols(); ++c) {
      const auto& cell = t.cell(best, c);
      try {
        row[t.columns()[c]] = parse_number(cell);
      } catch (const Error&) {
        row[t.columns()[c]] = cell;
      }
    }
    report["best"] = row;
    report["best_index"] = best;
  }
  for (const auto& [port, values] : req.inputs) {
    if (port == "history") continue;
    for (const auto& v : values) report["extra"][port].push_back(artifact_summary(v));
  }
  InvokeResult res;
  res.outputs["report"] = ArtifactValue::of_json(DataKind::document, report);
  return res;
}

}  // namespace

void register_data_plugins(PluginRegistry& registry) {
  registry.register_plugin(
      PluginDescriptor{"dataset",
                       ModuleKind::initialiser,
                       {MethodSpec{"load", {}, {in_port("data", DataKind::table), in_port("schema", DataKind::document, true)},
                                   dataset_ports()},
                        MethodSpec{"grid",
                                   {text_param("columns", "x,y"), int_param("steps", 21), num_param("lo", 0.0),
                                    num_param("hi", 1.0), bool_param("simplex", false)},
                                   {},
                                   dataset_ports()},
                        MethodSpec{"declare",
                                   {text_param("features", std::nullopt), text_param("target", "")},
                                   {},
                                   dataset_ports()}}},
      [](const InvokeRequest& req) {
        if (req.method == "load") return dataset_load(req);
        if (req.method == "grid") return dataset_grid(req);
        return dataset_declare(req);
      });

  registry.register_plugin(
      PluginDescriptor{"binarizer",
                       ModuleKind::data_processing,
                       {MethodSpec{"transform",
                                   {text_param("column", std::nullopt), num_param("threshold", 0.5),
                                    text_param("output_column", "")},
                                   {in_port("table", DataKind::table)},
                                   {out_port("table", DataKind::table)}}}},
      binarize_column);

  registry.register_plugin(
      PluginDescriptor{"standardizer",
                       ModuleKind::data_processing,
                       {MethodSpec{"scale",
                                   {text_param("columns", "")},
                                   {in_port("table", DataKind::table)},
                                   {out_port("table", DataKind::table), out_port("scaling", DataKind::document)}}}},
      standardize_columns);

  registry.register_plugin(
      PluginDescriptor{"accumulate",
                       ModuleKind::data_processing,
                       {MethodSpec{"append",
                                   {text_param("target", "y")},
                                   {in_port("x", DataKind::table), in_port("y", DataKind::any),
                                    in_port("history", DataKind::table, true), in_port("base", DataKind::table, true)},
                                   {out_port("history", DataKind::table)}}}},
      accumulate_append);

  registry.register_plugin(
      PluginDescriptor{"report",
                       ModuleKind::output,
                       {MethodSpec{"collect", {}, {in_port("items", DataKind::any, true)},
                                   {out_port("report", DataKind::document)}},
                        MethodSpec{"best",
                                   {text_param("target", "y"),
                                    enum_param("sense", {"minimize", "maximize"}, "minimize")},
                                   {in_port("history", DataKind::table), in_port("extra", DataKind::any, true)},
                                   {out_port("report", DataKind::document)}}}},
      [](const InvokeRequest& req) { return req.method == "collect" ? report_collect(req) : report_best(req); });
}

}  // namespace labloom::builtin
