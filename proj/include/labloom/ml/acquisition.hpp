#pragma once

#include "labloom/ml/gp.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace labloom::ml {

using Point = std::vector<double>;

/// Expected improvement for minimization with exploration offset xi.
double expected_improvement(double mu, double sigma, double f_min, double xi);

struct AcquisitionConfig {
  std::size_t batch_size = 1;
  double xi = 0.0;
};

/// Indices of the candidates not present in `exclude` (exact coordinates).
std::vector<std::size_t> remaining_candidates(const std::vector<Point>& candidates, const std::vector<Point>& exclude);

/// The batch_size candidates with the highest EI under `model`, best first,
/// ties broken by lexicographic point order. Without a model the batch is a
/// seeded greedy maximin draw. Throws Error(exhausted) when fewer than
/// batch_size candidates remain.
std::vector<std::size_t> bo_propose(const GPModel* model, const std::vector<Point>& candidates,
                                    const AcquisitionConfig& acq, const std::vector<Point>& exclude,
                                    std::uint64_t seed);

/// Uniform draw without replacement among the unexcluded candidates.
std::vector<std::size_t> random_propose(const std::vector<Point>& candidates, const std::vector<Point>& exclude,
                                        std::size_t batch_size, std::mt19937_64& rng);

}  // namespace labloom::ml
