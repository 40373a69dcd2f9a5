#include "labloom/ml/acquisition.hpp"

#include "labloom/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

namespace labloom::ml {

double expected_improvement(double mu, double sigma, double f_min, double xi) {
  const double gap = f_min - xi - mu;
  if (!(sigma > 0.0)) return std::max(gap, 0.0);
  const double z = gap / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return std::max(sigma * (z * cdf + pdf), 0.0);
}

std::vector<std::size_t> remaining_candidates(const std::vector<Point>& candidates, const std::vector<Point>& exclude) {
  const std::set<Point> excluded(exclude.begin(), exclude.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!excluded.count(candidates[i])) out.push_back(i);
  }
  return out;
}

namespace {

void require(std::size_t remaining, std::size_t batch) {
  if (batch < 1) throw Error(ErrorCode::domain, "batch_size must be at least 1");
  if (remaining < batch) {
    throw Error(ErrorCode::exhausted, "candidate pool exhausted: " + std::to_string(remaining) +
                                          " left, batch of " + std::to_string(batch) + " requested");
  }
}

double sq_dist(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::vector<std::size_t> maximin(const std::vector<Point>& candidates, std::vector<std::size_t> pool,
                                 std::size_t batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<std::size_t> chosen{pool[pick(rng)]};
  pool.erase(std::find(pool.begin(), pool.end(), chosen.front()));
  std::vector<double> nearest(pool.size(), std::numeric_limits<double>::infinity());
  while (chosen.size() < batch) {
    std::size_t best = 0;
    for (std::size_t k = 0; k < pool.size(); ++k) {
      nearest[k] = std::min(nearest[k], sq_dist(candidates[pool[k]], candidates[chosen.back()]));
      if (nearest[k] > nearest[best] ||
          (nearest[k] == nearest[best] && candidates[pool[k]] < candidates[pool[best]])) {
        best = k;
      }
    }
    chosen.push_back(pool[best]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
    nearest.erase(nearest.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return chosen;
}

}  // namespace

std::vector<std::size_t> bo_propose(const GPModel* model, const std::vector<Point>& candidates,
                                    const AcquisitionConfig& acq, const std::vector<Point>& exclude,
                                    std::uint64_t seed) {
  auto pool = remaining_candidates(candidates, exclude);
  require(pool.size(), acq.batch_size);
  if (!model || model->size() == 0) return maximin(candidates, std::move(pool), acq.batch_size, seed);

  const Eigen::Index d = model->X().cols();
  Eigen::MatrixXd Q(static_cast<Eigen::Index>(pool.size()), d);
  for (std::size_t k = 0; k < pool.size(); ++k) {
    const auto& p = candidates[pool[k]];
    if (static_cast<Eigen::Index>(p.size()) != d) throw Error(ErrorCode::domain, "candidate dimension mismatch");
    for (Eigen::Index j = 0; j < d; ++j) Q(static_cast<Eigen::Index>(k), j) = p[static_cast<std::size_t>(j)];
  }
  const auto pred = model->predict(Q);
  const double f_min = model->y().minCoeff();
  std::vector<double> ei(pool.size());
  for (std::size_t k = 0; k < pool.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    ei[k] = expected_improvement(pred.mean(i), std::sqrt(pred.variance(i)), f_min, acq.xi);
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ei[a] != ei[b]) return ei[a] > ei[b];
    return candidates[pool[a]] < candidates[pool[b]];
  });
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < acq.batch_size; ++k) out.push_back(pool[order[k]]);
  return out;
}

std::vector<std::size_t> random_propose(const std::vector<Point>& candidates, const std::vector<Point>& exclude,
                                        std::size_t batch_size, std::mt19937_64& rng) {
  auto pool = remaining_candidates(candidates, exclude);
  require(pool.size(), batch_size);
  // Partial Fisher-Yates with an explicit uniform draw per position.
  for (std::size_t k = 0; k < batch_size; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
    std::swap(pool[k], pool[pick(rng)]);
  }
  pool.resize(batch_size);
  return pool;
}

}  // namespace labloom::ml
