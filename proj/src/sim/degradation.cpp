#include "labloom/sim/degradation.hpp"

#include "labloom/error.hpp"

#include <cmath>

namespace labloom::sim {

namespace {
constexpr double kTol = 1e-12;
}

bool in_simplex(double x, double y) { return x >= -kTol && y >= -kTol && x + y <= 1.0 + kTol; }

double drift(double x, double y, std::array<double, 2> c_star) {
  return (x - c_star[0]) * (x - c_star[0]) + (y - c_star[1]) * (y - c_star[1]);
}

std::vector<double> sample_times(double horizon, double dt) {
  if (!(horizon > 0.0) || !(dt > 0.0)) throw Error(ErrorCode::domain, "horizon and step must be positive");
  std::vector<double> t;
  for (std::size_t k = 0;; ++k) {
    const double v = static_cast<double>(k) * dt;
    if (v > horizon * (1.0 + 1e-12)) break;
    t.push_back(v);
  }
  return t;
}

DegradationSeries simulate_degradation(double x, double y, double horizon, double dt, double sigma,
                                       std::mt19937_64& rng, std::array<double, 2> c_star) {
  if (!in_simplex(x, y)) throw Error(ErrorCode::domain, "composition lies outside the simplex");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::domain, "noise sigma must be non-negative");
  DegradationSeries s;
  s.times = sample_times(horizon, dt);
  const double r = drift(x, y, c_star);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double t : s.times) {
    const double eps = sigma > 0.0 ? sigma * noise(rng) : 0.0;
    s.color.push_back(std::max(0.0, r * t + eps));
  }
  return s;
}

double instability_index(const DegradationSeries& series) {
  if (series.times.size() != series.color.size()) throw Error(ErrorCode::domain, "series lengths differ");
  double ic = 0.0;
  for (std::size_t k = 1; k < series.times.size(); ++k) {
    ic += std::abs(series.color[k] - series.color[0]) * (series.times[k] - series.times[k - 1]);
  }
  return ic;
}

}  // namespace labloom::sim
