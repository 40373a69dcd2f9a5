#pragma once

#include "json.hpp"

#include <Eigen/Dense>

#include <vector>

namespace labloom::ml {

double sigmoid(double z);

struct ScoringModel {
  std::vector<double> w;
  double b = 0.0;

  double logit(const std::vector<double>& x) const;
  double score(const std::vector<double>& x) const { return sigmoid(logit(x)); }

  /// {"kind":"scoring","w":[...],"b":...}
  nlohmann::json to_json() const;
  static ScoringModel from_json(const nlohmann::json& j);
};

/// argmin |score(x) - 0.5|, ties to the lexicographically smallest point.
std::size_t uncertainty_select(const ScoringModel& model, const std::vector<std::vector<double>>& candidates);

struct LabeledPoint {
  std::vector<double> x;
  int label = 0;
};

/// Negative log posterior of theta = (w, b): logistic loss plus a
/// zero-mean Gaussian prior of variance prior_var on every coordinate.
double scoring_objective(const std::vector<LabeledPoint>& data, const Eigen::VectorXd& theta, double prior_var);
Eigen::VectorXd scoring_gradient(const std::vector<LabeledPoint>& data, const Eigen::VectorXd& theta,
                                 double prior_var);

struct FitReport {
  std::size_t iterations = 0;
  double grad_norm = 0.0;  // infinity norm at exit
};

/// MAP estimate by damped Newton iterations from zero; stops when the
/// gradient infinity norm drops below 1e-8 or after 500 iterations.
ScoringModel fit_scoring(const std::vector<LabeledPoint>& data, double prior_var, FitReport* report = nullptr);

}  // namespace labloom::ml
