#include "doctest.h"

#include "labloom/error.hpp"
#include "labloom/sim/coadapt.hpp"
#include "labloom/sim/degradation.hpp"
#include "labloom/sim/generator.hpp"
#include "labloom/sim/test_functions.hpp"

#include <cmath>

using namespace labloom;
using namespace labloom::sim;

TEST_SUITE_BEGIN("sim");

TEST_CASE("degradation drift vanishes at the stable composition") {
  CHECK(drift(0.2, 0.1) == 0.0);
  CHECK(drift(0.5, 0.5) == doctest::Approx(0.09 + 0.16));
  CHECK(drift(0, 0, {0.5, 0.5}) == doctest::Approx(0.5));
}

TEST_CASE("sample times include the horizon") {
  const auto t = sample_times(1.0, 0.25);
  REQUIRE(t.size() == 5);
  CHECK(t.back() == doctest::Approx(1.0));
  CHECK_THROWS_AS(simulate_degradation(0.2, 0.2, 0.0, 0.1, 0.0, *std::make_unique<std::mt19937_64>(1)), Error);
}

TEST_CASE("noiseless degradation is linear and its index has a closed form") {
  std::mt19937_64 rng(1);
  const auto s = simulate_degradation(0.6, 0.3, 2.0, 0.5, 0.0, rng);
  const double r = drift(0.6, 0.3);
  REQUIRE(s.color.size() == 5);
  for (std::size_t k = 0; k < s.color.size(); ++k) CHECK(s.color[k] == doctest::Approx(r * 0.5 * k));
  // sum_k r t_k dt = r dt^2 (1 + 2 + 3 + 4)
  CHECK(instability_index(s) == doctest::Approx(r * 0.25 * 10));
}

TEST_CASE("instability index integrates absolute deviation from the first sample") {
  DegradationSeries s{{0, 1, 3}, {0.5, 0.2, 1.0}};
  CHECK(instability_index(s) == doctest::Approx(0.3 * 1 + 0.5 * 2));
}

TEST_CASE("compositions outside the simplex are rejected") {
  std::mt19937_64 rng(1);
  CHECK(in_simplex(0.5, 0.5));
  CHECK_FALSE(in_simplex(0.7, 0.5));
  CHECK_FALSE(in_simplex(-0.1, 0.5));
  CHECK_THROWS_AS(simulate_degradation(0.7, 0.5, 1, 0.5, 0, rng), Error);
}

TEST_CASE("behavior reward peaks at g(d)") {
  const std::array<double, 2> d{0.5, -0.3};
  const double g = std::sin(0.5) - 0.3;
  CHECK(behavior_target(d) == doctest::Approx(g));
  CHECK(behavior_reward(d, g) == 0.0);
  CHECK(behavior_reward(d, g + 0.5) == doctest::Approx(-0.25));
  CHECK(outer_performance({1.0, -0.5}, -0.2) == doctest::Approx(-0.2));
  CHECK(outer_performance({0.0, 0.5}, 0.0) == doctest::Approx(-0.2));
}

TEST_CASE("hill climbing improves monotonically and converges") {
  std::mt19937_64 rng(4);
  const std::array<double, 2> d{1.2, 0.4};
  HillState s;
  double last = -1e300;
  for (int i = 0; i < 40; ++i) {
    s = behavior_step(d, s, rng);
    CHECK(s.reward >= last);
    last = s.reward;
  }
  CHECK(s.iterations == 40);
  CHECK(s.theta == doctest::Approx(behavior_target(d)).epsilon(1e-4));
  std::mt19937_64 again(4);
  CHECK(inner_behavior_optimize(d, 40, again).theta == s.theta);
  CHECK_THROWS_AS(behavior_step({3.0, 0.0}, HillState{}, rng), Error);
}

TEST_CASE("candidate generator moves its center uphill of the score") {
  std::mt19937_64 rng(2);
  ml::ScoringModel model{{1.0, 0.0}, 0.0};
  GeneratorState state{{0.0, 0.0}};
  const auto pts = generate_candidates(model, 25, 0.5, state, rng);
  CHECK(pts.size() == 25);
  CHECK(pts[0].size() == 2);
  // gradient of sigmoid(w.x) at 0 is w / 4
  CHECK(state.mu[0] == doctest::Approx(0.125));
  CHECK(state.mu[1] == doctest::Approx(0.0));
}

TEST_CASE("synthetic labels follow the hidden hyperplane") {
  CHECK(synthetic_label({1, 0}, {1, -1}, 0.0) == 1);
  CHECK(synthetic_label({0, 1}, {1, -1}, 0.0) == 0);
  CHECK(synthetic_label({0, 0}, {1, -1}, 0.0) == 0);
}

TEST_CASE("test functions hit their known minima") {
  CHECK(test_function(TestFunction::branin, {-M_PI, 12.275}) == doctest::Approx(0.397887).epsilon(1e-5));
  CHECK(test_function(TestFunction::branin, {9.42478, 2.475}) == doctest::Approx(0.397887).epsilon(1e-5));
  CHECK(test_function(TestFunction::sphere, {0, 0, 0}) == 0.0);
  CHECK(test_function(TestFunction::rastrigin, {0, 0}) == doctest::Approx(0.0));
  CHECK(test_function(TestFunction::rastrigin, {1, 0}) == doctest::Approx(1.0));
  CHECK(parse_test_function("branin") == TestFunction::branin);
  CHECK_FALSE(parse_test_function("ackley"));
  CHECK_THROWS_AS(test_function(TestFunction::branin, {11, 0}), Error);
}

TEST_SUITE_END();
