#include "labloom/sim/coadapt.hpp"

#include "labloom/error.hpp"

#include <algorithm>
#include <cmath>

namespace labloom::sim {

namespace {

void check_design(std::array<double, 2> d) {
  for (double v : d) {
    if (!std::isfinite(v) || std::abs(v) > kDesignBound + 1e-12) {
      throw Error(ErrorCode::domain, "design parameter outside [-2, 2]");
    }
  }
}

}  // namespace

double behavior_target(std::array<double, 2> d) { return std::sin(d[0]) + d[1]; }

double behavior_reward(std::array<double, 2> d, double theta) {
  const double e = theta - behavior_target(d);
  return -e * e;
}

HillState behavior_step(std::array<double, 2> d, const HillState& state, std::mt19937_64& rng) {
  check_design(d);
  HillState next = state;
  ++next.iterations;
  if (state.iterations == 0) {
    next.theta = 0.0;
    next.step = 1.0;
    next.reward = behavior_reward(d, 0.0);
    return next;
  }
  std::bernoulli_distribution coin(0.5);
  const double first = coin(rng) ? 1.0 : -1.0;
  for (double dir : {first, -first}) {
    const double theta = std::clamp(state.theta + dir * state.step, -kThetaBound, kThetaBound);
    const double r = behavior_reward(d, theta);
    if (r > state.reward) {
      next.theta = theta;
      next.reward = r;
      return next;
    }
  }
  next.step = state.step / 2.0;
  return next;
}

BehaviorResult inner_behavior_optimize(std::array<double, 2> d, std::size_t budget, std::mt19937_64& rng) {
  if (budget < 1) throw Error(ErrorCode::domain, "behavior budget must be at least 1");
  check_design(d);
  HillState s;
  for (std::size_t i = 0; i < budget; ++i) s = behavior_step(d, s, rng);
  return {s.theta, s.reward};
}

double outer_performance(std::array<double, 2> d, double reward, std::array<double, 2> d_center) {
  const double dx = d[0] - d_center[0];
  const double dy = d[1] - d_center[1];
  return reward - 0.1 * (dx * dx + dy * dy);
}

}  // namespace labloom::sim
