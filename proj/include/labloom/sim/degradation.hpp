#pragma once

#include <array>
#include <random>
#include <vector>

namespace labloom::sim {

/// Default stable composition of the simulated landscape.
inline constexpr std::array<double, 2> kDefaultCStar{0.2, 0.1};

struct DegradationSeries {
  std::vector<double> times;  // hours, times[0] = 0
  std::vector<double> color;  // non-negative color deviation
};

/// Degradation drift ||c - c*||^2 of a composition (x, y).
double drift(double x, double y, std::array<double, 2> c_star = kDefaultCStar);

/// Sample times 0, dt, 2 dt, ... up to and including `horizon`.
std::vector<double> sample_times(double horizon, double dt);

/// color(t) = max(0, r(c) t + eps), eps ~ N(0, sigma^2) per sample.
/// Throws Error(domain) outside the simplex or for non-positive T / dt.
DegradationSeries simulate_degradation(double x, double y, double horizon, double dt, double sigma,
                                       std::mt19937_64& rng, std::array<double, 2> c_star = kDefaultCStar);

/// I_c = sum_k |color_k - color_0| (t_k - t_{k-1}).
double instability_index(const DegradationSeries& series);

/// Whether (x, y) lies on the composition simplex x, y >= 0, x + y <= 1.
bool in_simplex(double x, double y);

}  // namespace labloom::sim
