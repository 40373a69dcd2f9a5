#include "labloom/ml/gp.hpp"

#include "labloom/error.hpp"

#include <cmath>
#include <string>

namespace labloom::ml {

double se_kernel(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b, double sigma_f2, double ell) {
  return sigma_f2 * std::exp(-(a - b).squaredNorm() / (2.0 * ell * ell));
}

GPModel GPModel::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPHyper& hyper) {
  if (!(hyper.sigma_f2 > 0.0) || !(hyper.ell > 0.0) || !(hyper.sigma_n2 >= 0.0)) {
    throw Error(ErrorCode::domain, "GP hyperparameters need sigma_f2 > 0, ell > 0, sigma_n2 >= 0");
  }
  if (X.rows() < 1 || X.rows() != y.size()) {
    throw Error(ErrorCode::domain, "GP fit needs at least one point and one target per row");
  }
  if (!X.allFinite() || !y.allFinite()) throw Error(ErrorCode::domain, "GP training data must be finite");

  if (hyper.sigma_n2 == 0.0) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < X.rows(); ++j) {
        if (X.row(i) == X.row(j) && y(i) != y(j)) {
          throw Error(ErrorCode::numerical, "noiseless GP has conflicting targets at duplicate inputs (rows " +
                                                std::to_string(i) + " and " + std::to_string(j) + ")");
        }
      }
    }
  }

  GPModel m;
  m.X_ = X;
  m.y_ = y;
  m.hyper_ = hyper;
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      K(i, j) = K(j, i) = se_kernel(X.row(i), X.row(j), hyper.sigma_f2, hyper.ell);
    }
  }
  K.diagonal().array() += hyper.sigma_n2;

  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter;
    m.llt_.compute(Kj);
    if (m.llt_.info() == Eigen::Success) break;
    jitter = jitter == 0.0 ? 1e-12 : jitter * 10.0;
    if (jitter > 1e-6 * (1 + 1e-9)) {
      throw Error(ErrorCode::numerical, "kernel matrix is not positive definite even with jitter 1e-6");
    }
  }
  m.jitter_ = jitter;
  m.alpha_ = m.llt_.solve((y.array() - hyper.m0).matrix());
  return m;
}

GPModel::Prediction GPModel::predict(const Eigen::MatrixXd& queries) const {
  if (queries.cols() != X_.cols()) {
    throw Error(ErrorCode::domain, "query dimension " + std::to_string(queries.cols()) +
                                       " does not match training dimension " + std::to_string(X_.cols()));
  }
  const Eigen::Index n = X_.rows();
  const Eigen::Index q = queries.rows();
  Eigen::MatrixXd Ks(n, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) Ks(i, j) = se_kernel(X_.row(i), queries.row(j), hyper_.sigma_f2, hyper_.ell);
  }
  Prediction p;
  p.mean = (Ks.transpose() * alpha_).array() + hyper_.m0;
  const Eigen::MatrixXd V = llt_.matrixL().solve(Ks);
  p.variance = (hyper_.sigma_f2 - V.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
  return p;
}

nlohmann::json GPModel::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < X_.rows(); ++i) {
    std::vector<double> r(X_.cols());
    for (Eigen::Index j = 0; j < X_.cols(); ++j) r[j] = X_(i, j);
    rows.push_back(r);
  }
  std::vector<double> ys(y_.data(), y_.data() + y_.size());
  return {{"kind", "gp"},       {"sigma_f2", hyper_.sigma_f2}, {"ell", hyper_.ell}, {"sigma_n2", hyper_.sigma_n2},
          {"m0", hyper_.m0},    {"X", rows},                   {"y", ys}};
}

GPModel GPModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind") != "gp") throw Error(ErrorCode::schema, "model-params is not a GP model");
    GPHyper h{j.at("sigma_f2").get<double>(), j.at("ell").get<double>(), j.at("sigma_n2").get<double>(),
              j.at("m0").get<double>()};
    const auto rows = j.at("X").get<std::vector<std::vector<double>>>();
    const auto ys = j.at("y").get<std::vector<double>>();
    const Eigen::Index d = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != d) throw Error(ErrorCode::schema, "ragged GP inputs");
      for (Eigen::Index k = 0; k < d; ++k) X(static_cast<Eigen::Index>(i), k) = rows[i][k];
    }
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    return fit(X, y, h);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema, std::string("malformed GP model: ") + e.what());
  }
}

}  // namespace labloom::ml
