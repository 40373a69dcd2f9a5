#pragma once

#include "json.hpp"

#include <Eigen/Dense>

namespace labloom::ml {

struct GPHyper {
  double sigma_f2 = 1.0;  // signal variance
  double ell = 1.0;       // length-scale
  double sigma_n2 = 0.0;  // noise variance
  double m0 = 0.0;        // constant prior mean
};

/// Squared-exponential covariance between two rows.
double se_kernel(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b, double sigma_f2, double ell);

/// Zero-mean-plus-constant GP regression with a squared-exponential kernel
/// and fixed hyperparameters.
class GPModel {
 public:
  struct Prediction {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;  // latent, clamped at 0
  };

  /// Factorizes K + sigma_n2 I. Escalates diagonal jitter from 1e-12 up to
  /// 1e-6 before giving up with Error(numerical).
  static GPModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPHyper& hyper);

  Prediction predict(const Eigen::MatrixXd& queries) const;

  const GPHyper& hyper() const { return hyper_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& y() const { return y_; }
  double jitter() const { return jitter_; }
  Eigen::Index size() const { return X_.rows(); }

  /// {"kind":"gp","sigma_f2","ell","sigma_n2","m0","X","y"}
  nlohmann::json to_json() const;
  static GPModel from_json(const nlohmann::json& j);

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  GPHyper hyper_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

}  // namespace labloom::ml
