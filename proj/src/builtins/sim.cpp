#include "common.hpp"

#include "labloom/ml/scoring.hpp"
#include "labloom/sim/coadapt.hpp"
#include "labloom/sim/degradation.hpp"
#include "labloom/sim/generator.hpp"
#include "labloom/sim/test_functions.hpp"

#include <algorithm>
#include <cmath>

namespace labloom::builtin {

namespace {

std::array<double, 2> sim_pair(const InvokeRequest& req, const std::string& key, std::array<double, 2> fallback) {
  const json cfg = simulator_config(req);
  if (!cfg.contains(key)) return fallback;
  const auto v = cfg.at(key).get<std::vector<double>>();
  if (v.size() != 2) throw Error(ErrorCode::domain, "simulator '" + key + "' must have two entries");
  return {v[0], v[1]};
}

/// Appends `span` hours of color samples for every batch composition. A
/// series starts over at the first pass of the enclosing loop.
InvokeResult chamber_capture(const InvokeRequest& req) {
  const auto features = split_list(req.param<std::string>("features"));
  if (features.size() != 2) throw Error(ErrorCode::domain, "chamber needs two composition columns");
  const auto batch = numeric_rows(merged_table(req, "batch"), features);
  const double dt = req.param<double>("dt");
  const double span = req.param<double>("span");
  if (!(dt > 0.0) || !(span > 0.0)) throw Error(ErrorCode::domain, "dt and span must be positive");
  const double sigma = sim_number(req, "noise_sigma", "noise_sigma", 0.0);
  const auto c_star = sim_pair(req, "c_star", sim::kDefaultCStar);
  for (const auto& c : batch) {
    if (!sim::in_simplex(c[0], c[1])) {
      throw Error(ErrorCode::domain, "composition (" + format_number(c[0]) + ", " + format_number(c[1]) +
                                         ") is outside the simplex");
    }
  }

  std::vector<std::string> columns{"t"};
  for (std::size_t k = 0; k < batch.size(); ++k) columns.push_back("s" + std::to_string(k));
  Table series(columns);
  const auto* previous = req.input("series");
  if (previous && req.iteration.innermost_index() > 0) {
    const Table prev = previous->table();
    if (prev.columns() != columns) throw Error(ErrorCode::domain, "series does not match the batch");
    series = prev;
  }
  auto rng = rng_for(req);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto per_capture = static_cast<std::size_t>(std::llround(span / dt));
  const std::size_t first = series.rows();
  const std::size_t last = first == 0 ? per_capture : first + per_capture - 1;
  for (std::size_t k = first; k <= last; ++k) {
    const double t = static_cast<double>(k) * dt;
    std::vector<double> row{t};
    for (const auto& c : batch) {
      const double eps = sigma > 0.0 ? sigma * noise(rng) : 0.0;
      row.push_back(std::max(0.0, sim::drift(c[0], c[1], c_star) * t + eps));
    }
    series.add_numeric_row(row);
  }
  InvokeResult res;
  res.outputs["series"] = ArtifactValue::of_table(DataKind::series, series);
  res.diagnostics["samples"] = series.rows();
  return res;
}

InvokeResult instability_method(const InvokeRequest& req) {
  const Table t = first_input(req, "series").table();
  if (!t.has_column("t")) throw Error(ErrorCode::domain, "series has no 't' column");
  const auto times = t.column_values("t");
  Table out({"ic"});
  double best = INFINITY;
  for (const auto& col : t.columns()) {
    if (col == "t") continue;
    sim::DegradationSeries s{times, t.column_values(col)};
    const double ic = sim::instability_index(s);
    out.add_numeric_row({ic});
    best = std::min(best, ic);
  }
  if (out.rows() == 0) throw Error(ErrorCode::domain, "series has no sample columns");
  InvokeResult res;
  res.outputs["ic"] = ArtifactValue::of_table(DataKind::table, out);
  res.outputs["ic_best"] = ArtifactValue::of_json(DataKind::scalar, best);
  return res;
}

std::vector<std::array<double, 2>> designs(const InvokeRequest& req) {
  const auto features = split_list(req.param<std::string>("features"));
  if (features.size() != 2) throw Error(ErrorCode::domain, "designs have two columns");
  std::vector<std::array<double, 2>> out;
  for (const auto& r : numeric_rows(merged_table(req, "design"), features)) out.push_back({r[0], r[1]});
  if (out.empty()) throw Error(ErrorCode::domain, "no design to train");
  return out;
}

Table behavior_table(const InvokeRequest& req, const std::vector<std::array<double, 2>>& ds,
                     const std::vector<std::pair<double, double>>& results) {
  auto cols = split_list(req.param<std::string>("features"));
  cols.push_back("theta");
  cols.push_back("R");
  Table out(cols);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.add_numeric_row({ds[i][0], ds[i][1], results[i].first, results[i].second});
  }
  return out;
}

/// One hill-climbing iteration per design; state starts over at the first pass.
InvokeResult behavior_step_method(const InvokeRequest& req) {
  const auto ds = designs(req);
  std::vector<sim::HillState> states(ds.size());
  const auto* prev = req.input("state");
  if (prev && req.iteration.innermost_index() > 0) {
    const json j = prev->value();
    const auto& rows = j.at("rows");
    if (rows.size() != ds.size()) throw Error(ErrorCode::domain, "behavior state does not match the designs");
    for (std::size_t i = 0; i < ds.size(); ++i) {
      states[i].theta = rows[i].at("theta").get<double>();
      states[i].step = rows[i].at("step").get<double>();
      states[i].reward = rows[i].at("reward").get<double>();
      states[i].iterations = rows[i].at("iterations").get<std::size_t>();
    }
  }
  auto rng = rng_for(req);
  json state = {{"rows", json::array()}};
  std::vector<std::pair<double, double>> results;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    states[i] = sim::behavior_step(ds[i], states[i], rng);
    state["rows"].push_back({{"theta", states[i].theta},
                             {"step", states[i].step},
                             {"reward", states[i].reward},
                             {"iterations", states[i].iterations}});
    results.emplace_back(states[i].theta, states[i].reward);
  }
  InvokeResult res;
  res.outputs["state"] = ArtifactValue::of_json(DataKind::document, state);
  res.outputs["behavior"] = ArtifactValue::of_table(DataKind::table, behavior_table(req, ds, results));
  return res;
}

InvokeResult behavior_optimize_method(const InvokeRequest& req) {
  const auto ds = designs(req);
  const auto budget = req.param<long long>("budget");
  if (budget < 1) throw Error(ErrorCode::domain, "budget must be at least 1");
  auto rng = rng_for(req);
  std::vector<std::pair<double, double>> results;
  for (const auto& d : ds) {
    const auto r = sim::inner_behavior_optimize(d, static_cast<std::size_t>(budget), rng);
    results.emplace_back(r.theta, r.reward);
  }
  InvokeResult res;
  res.outputs["behavior"] = ArtifactValue::of_table(DataKind::table, behavior_table(req, ds, results));
  return res;
}

InvokeResult performance_method(const InvokeRequest& req) {
  const auto features = split_list(req.param<std::string>("features"));
  if (features.size() != 2) throw Error(ErrorCode::domain, "designs have two columns");
  const auto center = sim_pair(req, "d_center", sim::kDefaultDCenter);
  auto cols = features;
  cols.push_back("theta");
  cols.push_back("R");
  const auto rows = numeric_rows(merged_table(req, "behavior"), cols);
  cols.push_back("J");
  Table out(cols);
  double best = -INFINITY;
  for (auto row : rows) {
    const double j = sim::outer_performance({row[0], row[1]}, row[3], center);
    row.push_back(j);
    best = std::max(best, j);
    out.add_numeric_row(row);
  }
  if (rows.empty()) throw Error(ErrorCode::domain, "no behavior rows to evaluate");
  InvokeResult res;
  res.outputs["result"] = ArtifactValue::of_table(DataKind::table, out);
  res.outputs["best_J"] = ArtifactValue::of_json(DataKind::scalar, best);
  return res;
}

InvokeResult test_function_method(const InvokeRequest& req) {
  const auto f = sim::parse_test_function(req.param<std::string>("function"));
  const auto features = split_list(req.param<std::string>("features"));
  const auto output = req.param<std::string>("output");
  const auto rows = numeric_rows(merged_table(req, "batch"), features);
  auto cols = features;
  cols.push_back(output);
  Table out(cols);
  for (auto row : rows) {
    row.push_back(sim::test_function(*f, row));
    out.add_numeric_row(row);
  }
  InvokeResult res;
  res.outputs["values"] = ArtifactValue::of_table(DataKind::table, out);
  return res;
}

InvokeResult generator_method(const InvokeRequest& req) {
  const auto dims = static_cast<std::size_t>(req.param<long long>("dims"));
  const auto n = req.param<long long>("n");
  if (dims < 1 || n < 1) throw Error(ErrorCode::domain, "dims and n must be positive");
  const double eta = sim_number(req, "eta", "eta", 0.5);
  ml::ScoringModel scoring;
  if (const auto* s = req.input("scoring")) {
    scoring = ml::ScoringModel::from_json(s->value());
  } else {
    scoring.w.assign(dims, 0.0);
  }
  if (scoring.w.size() != dims) throw Error(ErrorCode::domain, "scoring model dimension mismatch");
  sim::GeneratorState state;
  if (const auto* s = req.input("state")) {
    state.mu = s->value().at("mu").get<std::vector<double>>();
  } else {
    state.mu.assign(dims, 0.0);
  }
  if (state.mu.size() != dims) throw Error(ErrorCode::domain, "generator state dimension mismatch");
  auto rng = rng_for(req);
  const auto points = sim::generate_candidates(scoring, static_cast<std::size_t>(n), eta, state, rng);
  const auto prefix = req.param<std::string>("prefix");
  std::vector<std::string> cols;
  for (std::size_t j = 0; j < dims; ++j) cols.push_back(prefix + std::to_string(j + 1));
  Table out(cols);
  for (const auto& p : points) out.add_numeric_row(p);
  InvokeResult res;
  res.outputs["candidates"] = ArtifactValue::of_table(DataKind::candidate_set, out);
  res.outputs["state"] = ArtifactValue::of_json(DataKind::document, json{{"mu", state.mu}});
  return res;
}

/// Stands in for the human chemist; the hidden parameters never leave this function.
InvokeResult chemist_method(const InvokeRequest& req) {
  const auto features = split_list(req.param<std::string>("features"));
  const auto rows = numeric_rows(merged_table(req, "item"), features);
  if (rows.size() != 1) throw Error(ErrorCode::domain, "the chemist labels exactly one item at a time");
  const json cfg = simulator_config(req);
  if (!cfg.contains("w_star") || !cfg.contains("b_star")) {
    throw Error(ErrorCode::domain, "simulator config lacks w_star / b_star");
  }
  const auto w = cfg.at("w_star").get<std::vector<double>>();
  if (w.size() != features.size()) throw Error(ErrorCode::domain, "w_star dimension mismatch");
  InvokeResult res;
  res.outputs["label"] = ArtifactValue::of_json(DataKind::label, sim::synthetic_label(rows[0], w, cfg.at("b_star")));
  res.diagnostics["responder"] = "simulated";
  return res;
}

}  // namespace

void register_sim_plugins(PluginRegistry& registry) {
  registry.register_plugin(
      PluginDescriptor{"degradation-chamber",
                       ModuleKind::environment,
                       {MethodSpec{"capture",
                                   {text_param("features", "x,y"), num_param("dt", 0.2), num_param("span", 0.8),
                                    num_param("noise_sigma", -1.0), simulator_param()},
                                   {in_port("batch", DataKind::table), in_port("series", DataKind::series, true)},
                                   {out_port("series", DataKind::series)}}}},
      chamber_capture);

  registry.register_plugin(
      PluginDescriptor{"instability",
                       ModuleKind::modeling,
                       {MethodSpec{"index", {}, {in_port("series", DataKind::series)},
                                   {out_port("ic", DataKind::table), out_port("ic_best", DataKind::scalar)}}}},
      instability_method);

  registry.register_plugin(
      PluginDescriptor{"behavior-trainer",
                       ModuleKind::environment,
                       {MethodSpec{"step",
                                   {text_param("features", "d1,d2")},
                                   {in_port("design", DataKind::table), in_port("state", DataKind::document, true)},
                                   {out_port("state", DataKind::document), out_port("behavior", DataKind::table)}},
                        MethodSpec{"optimize",
                                   {text_param("features", "d1,d2"), int_param("budget", 30)},
                                   {in_port("design", DataKind::table)},
                                   {out_port("behavior", DataKind::table)}}}},
      [](const InvokeRequest& req) {
        return req.method == "step" ? behavior_step_method(req) : behavior_optimize_method(req);
      });

  registry.register_plugin(
      PluginDescriptor{"performance",
                       ModuleKind::modeling,
                       {MethodSpec{"evaluate",
                                   {text_param("features", "d1,d2"), simulator_param()},
                                   {in_port("behavior", DataKind::table)},
                                   {out_port("result", DataKind::table), out_port("best_J", DataKind::scalar)}}}},
      performance_method);

  registry.register_plugin(
      PluginDescriptor{"test-function",
                       ModuleKind::environment,
                       {MethodSpec{"evaluate",
                                   {enum_param("function", {"branin", "sphere", "rastrigin"}, "branin"),
                                    text_param("features", "x,y"), text_param("output", "f")},
                                   {in_port("batch", DataKind::table)},
                                   {out_port("values", DataKind::table)}}}},
      test_function_method);

  registry.register_plugin(
      PluginDescriptor{"candidate-generator",
                       ModuleKind::decision_making,
                       {MethodSpec{"generate",
                                   {int_param("n", 20), int_param("dims", 4), num_param("eta", -1.0),
                                    text_param("prefix", "f"), simulator_param()},
                                   {in_port("scoring", DataKind::model_params, true),
                                    in_port("state", DataKind::document, true)},
                                   {out_port("candidates", DataKind::candidate_set),
                                    out_port("state", DataKind::document)}}}},
      generator_method);

  registry.register_plugin(
      PluginDescriptor{"synthetic-chemist",
                       ModuleKind::user_interaction,
                       {MethodSpec{"label",
                                   {text_param("features", "f1,f2,f3,f4"), simulator_param()},
                                   {in_port("item", DataKind::table)},
                                   {out_port("label", DataKind::label)}}}},
      chemist_method);
}

}  // namespace labloom::builtin
