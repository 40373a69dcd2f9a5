#include "doctest.h"

#include "labloom/error.hpp"
#include "labloom/ml/acquisition.hpp"
#include "labloom/ml/gp.hpp"
#include "labloom/ml/preprocess.hpp"
#include "labloom/ml/scoring.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace labloom;
using namespace labloom::ml;

TEST_SUITE_BEGIN("ml");

namespace {

/// E[max(0, f_min - xi - Y)] by composite Simpson integration over +-10 sigma.
double ei_quadrature(double mu, double sigma, double f_min, double xi) {
  const int n = 20000;
  const double a = mu - 10 * sigma;
  const double b = mu + 10 * sigma;
  const double h = (b - a) / n;
  auto f = [&](double y) {
    const double z = (y - mu) / sigma;
    return std::max(0.0, f_min - xi - y) * std::exp(-0.5 * z * z) / (sigma * std::sqrt(2 * M_PI));
  };
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

}  // namespace

TEST_CASE("expected improvement matches numerical integration") {
  const double cases[][4] = {{0, 1, 0, 0}, {0.5, 0.3, 0.2, 0.01}, {-1, 2, 1, 0.1}, {2, 0.1, 0, 0}, {0, 1e-3, 1, 0}};
  for (const auto& c : cases) {
    CHECK(expected_improvement(c[0], c[1], c[2], c[3]) == doctest::Approx(ei_quadrature(c[0], c[1], c[2], c[3])).epsilon(1e-6));
  }
}

TEST_CASE("expected improvement degenerates to the gap without uncertainty") {
  CHECK(expected_improvement(0.2, 0.0, 1.0, 0.1) == doctest::Approx(0.7));
  CHECK(expected_improvement(2.0, 0.0, 1.0, 0.0) == 0.0);
  CHECK(expected_improvement(0.0, 1.0, 0.0, 0.0) == doctest::Approx(1.0 / std::sqrt(2 * M_PI)));
}

TEST_CASE("a one-point GP matches the closed-form posterior") {
  GPHyper h{1.5, 0.4, 0.01, 0.3};
  Eigen::MatrixXd X(1, 2);
  X << 0.1, 0.2;
  Eigen::VectorXd y(1);
  y << 2.0;
  const auto m = GPModel::fit(X, y, h);
  Eigen::MatrixXd Q(2, 2);
  Q << 0.1, 0.2, 0.5, 0.6;
  const auto p = m.predict(Q);
  for (int i = 0; i < 2; ++i) {
    const double d2 = std::pow(Q(i, 0) - 0.1, 2) + std::pow(Q(i, 1) - 0.2, 2);
    const double k = 1.5 * std::exp(-d2 / (2 * 0.4 * 0.4));
    const double denom = 1.5 + 0.01 + m.jitter();
    CHECK(p.mean(i) == doctest::Approx(0.3 + k / denom * (2.0 - 0.3)).epsilon(1e-12));
    CHECK(p.variance(i) == doctest::Approx(1.5 - k * k / denom).epsilon(1e-12));
  }
}

TEST_CASE("GP interpolates noiseless data and far predictions revert to the prior") {
  GPHyper h{1.0, 0.3, 0.0, -0.5};
  Eigen::MatrixXd X(3, 1);
  X << 0.0, 0.5, 1.0;
  Eigen::VectorXd y(3);
  y << 1.0, -1.0, 0.5;
  const auto m = GPModel::fit(X, y, h);
  const auto p = m.predict(X);
  for (int i = 0; i < 3; ++i) {
    CHECK(p.mean(i) == doctest::Approx(y(i)).epsilon(1e-5));
    CHECK(p.variance(i) < 1e-5);
  }
  Eigen::MatrixXd far(1, 1);
  far << 50.0;
  const auto q = m.predict(far);
  CHECK(q.mean(0) == doctest::Approx(-0.5));
  CHECK(q.variance(0) == doctest::Approx(1.0));
}

TEST_CASE("GP rejects bad inputs") {
  Eigen::MatrixXd X(2, 1);
  X << 0.3, 0.3;
  Eigen::VectorXd y(2);
  y << 1.0, 2.0;
  CHECK_THROWS_AS(GPModel::fit(X, y, GPHyper{1, 1, 0, 0}), Error);  // duplicate input, conflicting targets
  CHECK_NOTHROW(GPModel::fit(X, y, GPHyper{1, 1, 0.1, 0}));
  CHECK_THROWS_AS(GPModel::fit(X, y, GPHyper{0, 1, 0.1, 0}), Error);
  Eigen::MatrixXd Q(1, 3);
  Q.setZero();
  CHECK_THROWS_AS(GPModel::fit(X, y, GPHyper{1, 1, 0.1, 0}).predict(Q), Error);
}

TEST_CASE("GP models round-trip through JSON") {
  Eigen::MatrixXd X(2, 2);
  X << 0, 1, 1, 0;
  Eigen::VectorXd y(2);
  y << 0.25, -0.75;
  const auto m = GPModel::fit(X, y, GPHyper{2, 0.7, 1e-3, 0.1});
  const auto back = GPModel::from_json(m.to_json());
  Eigen::MatrixXd Q(1, 2);
  Q << 0.4, 0.4;
  CHECK(back.predict(Q).mean(0) == doctest::Approx(m.predict(Q).mean(0)).epsilon(1e-14));
  CHECK_THROWS_AS(GPModel::from_json({{"kind", "scoring"}}), Error);
}

TEST_CASE("bo_propose ranks by expected improvement and honours exclusions") {
  Eigen::MatrixXd X(2, 1);
  X << 0.0, 1.0;
  Eigen::VectorXd y(2);
  y << 1.0, 0.0;
  const auto m = GPModel::fit(X, y, GPHyper{1, 0.3, 1e-6, 0});
  const std::vector<Point> cand{{0.0}, {0.25}, {0.5}, {0.9}, {1.0}};
  AcquisitionConfig acq{2, 0.0};
  const auto picks = bo_propose(&m, cand, acq, {{0.0}, {1.0}}, 1);
  REQUIRE(picks.size() == 2);
  // independent ranking from the closed form
  const auto pred = m.predict((Eigen::MatrixXd(3, 1) << 0.25, 0.5, 0.9).finished());
  std::vector<std::pair<double, std::size_t>> ranked;
  for (int i = 0; i < 3; ++i) ranked.push_back({-expected_improvement(pred.mean(i), std::sqrt(pred.variance(i)), 0.0, 0.0), static_cast<std::size_t>(i + 1)});
  std::sort(ranked.begin(), ranked.end());
  CHECK(picks[0] == ranked[0].second);
  CHECK(picks[1] == ranked[1].second);
  CHECK_THROWS_AS(bo_propose(&m, cand, AcquisitionConfig{4, 0}, {{0.0}, {1.0}}, 1), Error);
}

TEST_CASE("bo_propose without a model draws a seeded space-filling batch") {
  std::vector<Point> cand;
  for (int i = 0; i <= 10; ++i) cand.push_back({i / 10.0});
  const auto a = bo_propose(nullptr, cand, AcquisitionConfig{3, 0}, {}, 5);
  CHECK(a == bo_propose(nullptr, cand, AcquisitionConfig{3, 0}, {}, 5));
  REQUIRE(a.size() == 3);
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 3);
  // the second pick is the candidate farthest from the first
  const double first = cand[a[0]][0];
  CHECK(std::abs(cand[a[1]][0] - first) == doctest::Approx(std::max(first, 1.0 - first)));
}

TEST_CASE("random_propose draws without replacement") {
  std::vector<Point> cand;
  for (int i = 0; i < 6; ++i) cand.push_back({double(i)});
  std::mt19937_64 rng(3);
  const auto picks = random_propose(cand, {{0.0}, {1.0}}, 4, rng);
  CHECK(std::set<std::size_t>(picks.begin(), picks.end()) == std::set<std::size_t>{2, 3, 4, 5});
  CHECK_THROWS_AS(random_propose(cand, {}, 7, rng), Error);
  CHECK(remaining_candidates(cand, {{2.0}}) == std::vector<std::size_t>{0, 1, 3, 4, 5});
}

TEST_CASE("scoring fit reaches the MAP found by a grid search") {
  // one feature plus bias, so the posterior can be scanned on a grid
  std::vector<LabeledPoint> data;
  const double xs[] = {-2, -1.2, -0.5, -0.1, 0.3, 0.8, 1.1, 2.0, -0.7, 0.6};
  const int ys[] = {0, 0, 1, 0, 1, 0, 1, 1, 0, 1};
  for (int i = 0; i < 10; ++i) data.push_back({{xs[i]}, ys[i]});
  FitReport report;
  const auto m = fit_scoring(data, 4.0, &report);
  CHECK(report.grad_norm < 1e-8);

  auto objective = [&](double w, double b) {
    double f = (w * w + b * b) / 8.0;
    for (const auto& p : data) {
      const double z = w * p.x[0] + b;
      f += std::log1p(std::exp(z)) - p.label * z;
    }
    return f;
  };
  double best_w = 0, best_b = 0, best = 1e300;
  for (double w = -5; w <= 5; w += 0.01) {
    for (double b = -3; b <= 3; b += 0.01) {
      const double f = objective(w, b);
      if (f < best) best = f, best_w = w, best_b = b;
    }
  }
  CHECK(m.w[0] == doctest::Approx(best_w).epsilon(0.01));
  CHECK(std::abs(m.b - best_b) <= 0.01);
  CHECK(objective(m.w[0], m.b) <= best + 1e-12);
}

TEST_CASE("scoring gradient agrees with central differences") {
  std::vector<LabeledPoint> data{{{0.5, -1}, 1}, {{-0.3, 0.2}, 0}, {{1.5, 0.7}, 1}, {{-2, 1}, 0}};
  Eigen::VectorXd theta(3);
  theta << 0.3, -0.8, 0.1;
  const auto g = scoring_gradient(data, theta, 1.5);
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd p = theta, m = theta;
    p(i) += 1e-5;
    m(i) -= 1e-5;
    const double fd = (scoring_objective(data, p, 1.5) - scoring_objective(data, m, 1.5)) / 2e-5;
    CHECK(g(i) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("separable data stays finite thanks to the prior") {
  std::vector<LabeledPoint> data{{{-1}, 0}, {{1}, 1}};
  const auto m = fit_scoring(data, 10.0);
  CHECK(std::isfinite(m.w[0]));
  CHECK(m.w[0] > 0);
  CHECK(m.score({1}) > 0.5);
}

TEST_CASE("uncertainty sampling picks the point nearest the boundary") {
  ScoringModel m{{1.0, -1.0}, 0.0};
  CHECK(uncertainty_select(m, {{2, 0}, {0.5, 0.4}, {-1, 1}}) == 1);
  // ties go to the lexicographically smallest point
  CHECK(uncertainty_select(m, {{1, 1}, {0, 0}, {2, 3}}) == 1);
  CHECK(ScoringModel::from_json(m.to_json()).w == m.w);
  CHECK(sigmoid(0) == 0.5);
}

TEST_CASE("binarize and standardize") {
  CHECK(binarize({0.1, 0.5, 0.9}, 0.5) == std::vector<int>{0, 1, 1});
  CHECK_THROWS_AS(binarize({0.1, std::nan("")}, 0.5), Error);
  const auto s = standardize({1, 2, 3, 4});
  CHECK(s.mean == 2.5);
  CHECK(s.std == doctest::Approx(std::sqrt(1.25)));
  CHECK(s.values[0] == doctest::Approx(-1.5 / std::sqrt(1.25)));
  CHECK_THROWS_AS(standardize({3, 3}), Error);
  CHECK_THROWS_AS(standardize({1}), Error);
}

TEST_SUITE_END();
