#include "labloom/ml/scoring.hpp"

#include "labloom/error.hpp"

#include <cmath>
#include <string>

namespace labloom::ml {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double ScoringModel::logit(const std::vector<double>& x) const {
  if (x.size() != w.size()) throw Error(ErrorCode::domain, "scoring model dimension mismatch");
  double z = b;
  for (std::size_t i = 0; i < w.size(); ++i) z += w[i] * x[i];
  return z;
}

nlohmann::json ScoringModel::to_json() const { return {{"kind", "scoring"}, {"w", w}, {"b", b}}; }

ScoringModel ScoringModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind") != "scoring") throw Error(ErrorCode::schema, "model-params is not a scoring model");
    return {j.at("w").get<std::vector<double>>(), j.at("b").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema, std::string("malformed scoring model: ") + e.what());
  }
}

std::size_t uncertainty_select(const ScoringModel& model, const std::vector<std::vector<double>>& candidates) {
  if (candidates.empty()) throw Error(ErrorCode::domain, "uncertainty_select needs candidates");
  std::size_t best = 0;
  double best_gap = std::abs(model.score(candidates[0]) - 0.5);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double gap = std::abs(model.score(candidates[i]) - 0.5);
    if (gap < best_gap || (gap == best_gap && candidates[i] < candidates[best])) {
      best = i;
      best_gap = gap;
    }
  }
  return best;
}

namespace {

/// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logit_of(const LabeledPoint& p, const Eigen::VectorXd& theta) {
  const auto d = static_cast<Eigen::Index>(p.x.size());
  double z = theta(d);
  for (Eigen::Index i = 0; i < d; ++i) z += theta(i) * p.x[static_cast<std::size_t>(i)];
  return z;
}

void check(const std::vector<LabeledPoint>& data, Eigen::Index dims, double prior_var) {
  if (!(prior_var > 0.0)) throw Error(ErrorCode::domain, "prior variance must be positive");
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (static_cast<Eigen::Index>(data[k].x.size()) + 1 != dims) {
      throw Error(ErrorCode::domain, "labeled point " + std::to_string(k) + " has the wrong dimension");
    }
    for (double v : data[k].x) {
      if (!std::isfinite(v)) throw Error(ErrorCode::domain, "non-finite feature in labeled point " + std::to_string(k));
    }
    if (data[k].label != 0 && data[k].label != 1) {
      throw Error(ErrorCode::domain, "label of point " + std::to_string(k) + " must be 0 or 1");
    }
  }
}

}  // namespace

double scoring_objective(const std::vector<LabeledPoint>& data, const Eigen::VectorXd& theta, double prior_var) {
  check(data, theta.size(), prior_var);
  double f = theta.squaredNorm() / (2.0 * prior_var);
  for (const auto& p : data) {
    const double z = logit_of(p, theta);
    f += softplus(z) - p.label * z;
  }
  return f;
}

Eigen::VectorXd scoring_gradient(const std::vector<LabeledPoint>& data, const Eigen::VectorXd& theta,
                                 double prior_var) {
  check(data, theta.size(), prior_var);
  Eigen::VectorXd g = theta / prior_var;
  const auto d = theta.size() - 1;
  for (const auto& p : data) {
    const double r = sigmoid(logit_of(p, theta)) - p.label;
    for (Eigen::Index i = 0; i < d; ++i) g(i) += r * p.x[static_cast<std::size_t>(i)];
    g(d) += r;
  }
  return g;
}

ScoringModel fit_scoring(const std::vector<LabeledPoint>& data, double prior_var, FitReport* report) {
  if (data.empty()) throw Error(ErrorCode::domain, "fit_scoring needs at least one labeled point");
  const auto d = static_cast<Eigen::Index>(data.front().x.size());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  check(data, d + 1, prior_var);

  std::size_t it = 0;
  Eigen::VectorXd g = scoring_gradient(data, theta, prior_var);
  double f = scoring_objective(data, theta, prior_var);
  for (; it < 500 && g.lpNorm<Eigen::Infinity>() >= 1e-8; ++it) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d + 1, d + 1) / prior_var;
    for (const auto& p : data) {
      const double s = sigmoid(logit_of(p, theta));
      Eigen::VectorXd x(d + 1);
      for (Eigen::Index i = 0; i < d; ++i) x(i) = p.x[static_cast<std::size_t>(i)];
      x(d) = 1.0;
      H.noalias() += s * (1.0 - s) * x * x.transpose();
    }
    const Eigen::VectorXd step = H.llt().solve(g);
    // Backtracking keeps every iterate a descent step.
    double t = 1.0;
    Eigen::VectorXd next = theta - step;
    double f_next = scoring_objective(data, next, prior_var);
    while (f_next > f && t > 1e-10) {
      t *= 0.5;
      next = theta - t * step;
      f_next = scoring_objective(data, next, prior_var);
    }
    if (f_next > f) break;
    theta = next;
    f = f_next;
    g = scoring_gradient(data, theta, prior_var);
  }
  if (report) *report = {it, g.lpNorm<Eigen::Infinity>()};
  ScoringModel m;
  m.w.assign(theta.data(), theta.data() + d);
  m.b = theta(d);
  return m;
}

}  // namespace labloom::ml
