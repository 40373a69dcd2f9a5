#include "common.hpp"

#include "labloom/ml/acquisition.hpp"
#include "labloom/ml/gp.hpp"
#include "labloom/ml/scoring.hpp"

#include <cmath>

namespace labloom::builtin {

namespace {

using ml::Point;

struct TrainingSet {
  std::vector<Point> X;
  std::vector<double> y;
};

TrainingSet training_set(const InvokeRequest& req, const std::vector<std::string>& features,
                         const std::string& target) {
  TrainingSet ts;
  const auto* h = req.input("history");
  if (!h) return ts;
  const Table t = h->table();
  auto cols = features;
  cols.push_back(target);
  for (auto& row : numeric_rows(t, cols)) {
    ts.y.push_back(row.back());
    row.pop_back();
    ts.X.push_back(std::move(row));
  }
  return ts;
}

Table points_table(const std::vector<std::string>& features, const std::vector<Point>& points,
                   const std::vector<std::size_t>& picks) {
  Table out(features);
  for (auto i : picks) out.add_numeric_row(points[i]);
  return out;
}

ml::GPHyper hyper_from(const InvokeRequest& req) {
  return {req.param<double>("sigma_f2"), req.param<double>("ell"), req.param<double>("sigma_n2"),
          req.param<double>("m0")};
}

std::vector<ParamSpec> gp_params() {
  return {num_param("sigma_f2", 1.0), num_param("ell", 0.2), num_param("sigma_n2", 1e-6), num_param("m0", 0.0)};
}

/// GP over the (optionally standardized, sign-adjusted) targets.
struct Surrogate {
  std::optional<ml::GPModel> model;
  double y_mean = 0.0;
  double y_scale = 1.0;
  json to_json(const ml::GPHyper& hyper) const {
    json j = model ? model->to_json()
                   : json{{"kind", "gp"},           {"sigma_f2", hyper.sigma_f2}, {"ell", hyper.ell},
                          {"sigma_n2", hyper.sigma_n2}, {"m0", hyper.m0},         {"X", json::array()},
                          {"y", json::array()}};
    j["y_mean"] = y_mean;
    j["y_scale"] = y_scale;
    return j;
  }
};

Surrogate fit_surrogate(const TrainingSet& ts, const ml::GPHyper& hyper, bool normalize, bool maximize) {
  Surrogate s;
  if (ts.X.empty()) return s;
  const auto n = static_cast<Eigen::Index>(ts.X.size());
  const auto d = static_cast<Eigen::Index>(ts.X.front().size());
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = ts.X[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    y(i) = maximize ? -ts.y[static_cast<std::size_t>(i)] : ts.y[static_cast<std::size_t>(i)];
  }
  if (normalize) {
    s.y_mean = y.mean();
    const double var = (y.array() - s.y_mean).square().mean();
    s.y_scale = (n < 2 || var <= 0.0) ? 1.0 : std::sqrt(var);
    y = (y.array() - s.y_mean) / s.y_scale;
  }
  s.model = ml::GPModel::fit(X, y, hyper);
  return s;
}

InvokeResult bo_propose_method(const InvokeRequest& req) {
  const auto features = split_list(req.param<std::string>("features"));
  const auto target = req.param<std::string>("target");
  const Table cand = merged_table(req, "candidates");
  const auto points = numeric_rows(cand, features);
  const auto ts = training_set(req, features, target);
  const auto hyper = hyper_from(req);
  const bool maximize = req.param<std::string>("sense") == "maximize";
  const auto surrogate = fit_surrogate(ts, hyper, req.param<bool>("normalize"), maximize);

  ml::AcquisitionConfig acq;
  acq.batch_size = static_cast<std::size_t>(req.param<long long>("batch_size"));
  acq.xi = req.param<double>("xi");
  const auto picks =
      ml::bo_propose(surrogate.model ? &*surrogate.model : nullptr, points, acq, ts.X, req.rng_seed());

  InvokeResult res;
  res.outputs["batch"] = ArtifactValue::of_table(DataKind::candidate_set, points_table(features, points, picks));
  res.outputs["model"] = ArtifactValue::of_json(DataKind::model_params, surrogate.to_json(hyper));
  res.diagnostics["n_train"] = ts.X.size();
  res.diagnostics["mode"] = surrogate.model ? "expected-improvement" : "space-filling";
  return res;
}

InvokeResult random_propose_method(const InvokeRequest& req) {
  const auto features = split_list(req.param<std::string>("features"));
  const Table cand = merged_table(req, "candidates");
  const auto points = numeric_rows(cand, features);
  std::vector<Point> exclude;
  if (const auto* h = req.input("history")) exclude = numeric_rows(h->table(), features);
  auto rng = rng_for(req);
  const auto picks =
      ml::random_propose(points, exclude, static_cast<std::size_t>(req.param<long long>("batch_size")), rng);
  InvokeResult res;
  res.outputs["batch"] = ArtifactValue::of_table(DataKind::candidate_set, points_table(features, points, picks));
  return res;
}

InvokeResult uncertainty_select_method(const InvokeRequest& req) {
  const auto features = split_list(req.param<std::string>("features"));
  const Table cand = merged_table(req, "candidates");
  const auto points = numeric_rows(cand, features);
  std::vector<Point> exclude;
  if (const auto* e = req.input("exclude")) exclude = numeric_rows(e->table(), features);
  const auto remaining = ml::remaining_candidates(points, exclude);
  if (remaining.empty()) throw Error(ErrorCode::exhausted, "every candidate has already been selected");
  ml::ScoringModel model;
  if (const auto* s = req.input("scoring")) {
    model = ml::ScoringModel::from_json(s->value());
  } else {
    model.w.assign(features.size(), 0.0);
  }
  if (model.w.size() != features.size()) throw Error(ErrorCode::domain, "scoring model dimension mismatch");
  std::vector<Point> pool;
  for (auto i : remaining) pool.push_back(points[i]);
  const auto pick = ml::uncertainty_select(model, pool);
  InvokeResult res;
  res.outputs["selected"] =
      ArtifactValue::of_table(DataKind::candidate_set, points_table(features, points, {remaining[pick]}));
  res.diagnostics["score"] = model.score(pool[pick]);
  return res;
}

InvokeResult scoring_fit_method(const InvokeRequest& req) {
  const auto features = split_list(req.param<std::string>("features"));
  const auto target = req.param<std::string>("target");
  auto cols = features;
  cols.push_back(target);
  std::vector<ml::LabeledPoint> data;
  for (auto& row : numeric_rows(merged_table(req, "data"), cols)) {
    ml::LabeledPoint p;
    p.label = row.back() > 0.5 ? 1 : 0;
    row.pop_back();
    p.x = std::move(row);
    data.push_back(std::move(p));
  }
  if (data.empty()) throw Error(ErrorCode::domain, "no labeled examples to fit");
  ml::FitReport report;
  const auto model = ml::fit_scoring(data, req.param<double>("prior_var"), &report);
  InvokeResult res;
  res.outputs["model"] = ArtifactValue::of_json(DataKind::model_params, model.to_json());
  res.diagnostics["iterations"] = report.iterations;
  res.diagnostics["grad_norm"] = report.grad_norm;
  res.diagnostics["n"] = data.size();
  return res;
}

InvokeResult gp_fit_method(const InvokeRequest& req) {
  const auto features = split_list(req.param<std::string>("features"));
  const auto target = req.param<std::string>("target");
  auto cols = features;
  cols.push_back(target);
  const auto rows = numeric_rows(merged_table(req, "data"), cols);
  if (rows.empty()) throw Error(ErrorCode::domain, "no training rows");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(features.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < features.size(); ++j) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    y(static_cast<Eigen::Index>(i)) = rows[i].back();
  }
  const auto model = ml::GPModel::fit(X, y, hyper_from(req));
  InvokeResult res;
  res.outputs["model"] = ArtifactValue::of_json(DataKind::model_params, model.to_json());
  res.diagnostics["jitter"] = model.jitter();
  return res;
}

InvokeResult gp_predict_method(const InvokeRequest& req) {
  const auto features = split_list(req.param<std::string>("features"));
  const auto model = ml::GPModel::from_json(first_input(req, "model").value());
  const auto rows = numeric_rows(merged_table(req, "queries"), features);
  Eigen::MatrixXd Q(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < features.size(); ++j) {
      Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  const auto pred = model.predict(Q);
  auto cols = features;
  cols.push_back("mean");
  cols.push_back("variance");
  Table out(cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto row = rows[i];
    row.push_back(pred.mean(static_cast<Eigen::Index>(i)));
    row.push_back(pred.variance(static_cast<Eigen::Index>(i)));
    out.add_numeric_row(row);
  }
  InvokeResult res;
  res.outputs["prediction"] = ArtifactValue::of_table(DataKind::table, out);
  return res;
}

}  // namespace

void register_ml_plugins(PluginRegistry& registry) {
  auto bo_params = gp_params();
  for (auto p : {text_param("features", "x,y"), text_param("target", "y"), int_param("batch_size", 1),
                 num_param("xi", 0.01), bool_param("normalize", true),
                 enum_param("sense", {"minimize", "maximize"}, "minimize")}) {
    bo_params.push_back(p);
  }
  registry.register_plugin(
      PluginDescriptor{"bo",
                       ModuleKind::decision_making,
                       {MethodSpec{"propose",
                                   bo_params,
                                   {in_port("candidates", DataKind::table), in_port("history", DataKind::table, true)},
                                   {out_port("batch", DataKind::candidate_set),
                                    out_port("model", DataKind::model_params)}}}},
      bo_propose_method);

  registry.register_plugin(
      PluginDescriptor{"random-search",
                       ModuleKind::decision_making,
                       {MethodSpec{"propose",
                                   {text_param("features", "x,y"), text_param("target", "y"),
                                    int_param("batch_size", 1)},
                                   {in_port("candidates", DataKind::table), in_port("history", DataKind::table, true)},
                                   {out_port("batch", DataKind::candidate_set)}}}},
      random_propose_method);

  registry.register_plugin(
      PluginDescriptor{"uncertainty-sampling",
                       ModuleKind::decision_making,
                       {MethodSpec{"select",
                                   {text_param("features", std::nullopt)},
                                   {in_port("candidates", DataKind::table),
                                    in_port("scoring", DataKind::model_params, true),
                                    in_port("exclude", DataKind::table, true)},
                                   {out_port("selected", DataKind::candidate_set)}}}},
      uncertainty_select_method);

  registry.register_plugin(
      PluginDescriptor{"scoring-inference",
                       ModuleKind::modeling,
                       {MethodSpec{"fit",
                                   {text_param("features", std::nullopt), text_param("target", "label"),
                                    num_param("prior_var", 1.0)},
                                   {in_port("data", DataKind::table)},
                                   {out_port("model", DataKind::model_params)}}}},
      scoring_fit_method);

  auto fit_params = gp_params();
  fit_params.push_back(text_param("features", std::nullopt));
  fit_params.push_back(text_param("target", "y"));
  registry.register_plugin(
      PluginDescriptor{"gp-regression",
                       ModuleKind::modeling,
                       {MethodSpec{"fit", fit_params, {in_port("data", DataKind::table)},
                                   {out_port("model", DataKind::model_params)}},
                        MethodSpec{"predict",
                                   {text_param("features", std::nullopt)},
                                   {in_port("model", DataKind::model_params), in_port("queries", DataKind::table)},
                                   {out_port("prediction", DataKind::table)}}}},
      [](const InvokeRequest& req) { return req.method == "fit" ? gp_fit_method(req) : gp_predict_method(req); });
}

}  // namespace labloom::builtin
