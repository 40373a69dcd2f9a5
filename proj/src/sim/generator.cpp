#include "labloom/sim/generator.hpp"

#include "labloom/error.hpp"

namespace labloom::sim {

std::vector<std::vector<double>> generate_candidates(const ml::ScoringModel& scoring, std::size_t n, double eta,
                                                     GeneratorState& state, std::mt19937_64& rng) {
  if (n < 1) throw Error(ErrorCode::domain, "generator needs n >= 1");
  if (!(eta >= 0.0)) throw Error(ErrorCode::domain, "steering rate must be non-negative");
  if (state.mu.empty()) state.mu.assign(scoring.w.size(), 0.0);
  if (state.mu.size() != scoring.w.size()) throw Error(ErrorCode::domain, "generator and scoring dimensions differ");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> out(n, std::vector<double>(state.mu.size()));
  for (auto& x : out) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = state.mu[i] + normal(rng);
  }
  const double s = scoring.score(state.mu);
  for (std::size_t i = 0; i < state.mu.size(); ++i) state.mu[i] += eta * s * (1.0 - s) * scoring.w[i];
  return out;
}

int synthetic_label(const std::vector<double>& x, const std::vector<double>& w_star, double b_star) {
  if (x.size() != w_star.size()) throw Error(ErrorCode::domain, "candidate and hidden weights differ in dimension");
  double z = b_star;
  for (std::size_t i = 0; i < x.size(); ++i) z += w_star[i] * x[i];
  return z > 0.0 ? 1 : 0;
}

}  // namespace labloom::sim
