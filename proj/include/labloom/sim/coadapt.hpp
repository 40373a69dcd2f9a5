#pragma once

#include <array>
#include <random>

namespace labloom::sim {

inline constexpr std::array<double, 2> kDefaultDCenter{1.0, -0.5};
inline constexpr double kDesignBound = 2.0;
inline constexpr double kThetaBound = 5.0;

/// Behavior optimum g(d) = sin(d1) + d2.
double behavior_target(std::array<double, 2> d);
/// Reward f(d, theta) = -(theta - g(d))^2.
double behavior_reward(std::array<double, 2> d, double theta);

/// Hill-climbing state over theta, advanced one iteration at a time.
struct HillState {
  double theta = 0.0;  // best behavior so far
  double step = 1.0;
  double reward = 0.0;  // reward of theta
  std::size_t iterations = 0;
};

/// One hill-climbing iteration. The first evaluates theta = 0; later ones
/// probe theta +- step in a random order, accept the first improvement and
/// halve the step when neither improves. Throws Error(domain) for d outside the box.
HillState behavior_step(std::array<double, 2> d, const HillState& state, std::mt19937_64& rng);

struct BehaviorResult {
  double theta = 0.0;
  double reward = 0.0;
};

/// `budget` iterations of behavior_step from the initial state.
BehaviorResult inner_behavior_optimize(std::array<double, 2> d, std::size_t budget, std::mt19937_64& rng);

/// J(d) = R - 0.1 ||d - d_center||^2.
double outer_performance(std::array<double, 2> d, double reward,
                         std::array<double, 2> d_center = kDefaultDCenter);

}  // namespace labloom::sim
