#pragma once

#include "labloom/ml/scoring.hpp"

#include <random>
#include <vector>

namespace labloom::sim {

struct GeneratorState {
  std::vector<double> mu;  // sampling center
};

/// Draws n points from N(mu, I), then moves mu by eta times the gradient
/// of the scoring model's score at mu.
std::vector<std::vector<double>> generate_candidates(const ml::ScoringModel& scoring, std::size_t n, double eta,
                                                     GeneratorState& state, std::mt19937_64& rng);

/// 1 iff w* . x + b* > 0.
int synthetic_label(const std::vector<double>& x, const std::vector<double>& w_star, double b_star);

}  // namespace labloom::sim
