#include "labloom/sim/test_functions.hpp"

#include "labloom/error.hpp"

#include <cmath>

namespace labloom::sim {

std::optional<TestFunction> parse_test_function(std::string_view name) {
  if (name == "branin") return TestFunction::branin;
  if (name == "sphere") return TestFunction::sphere;
  if (name == "rastrigin") return TestFunction::rastrigin;
  return std::nullopt;
}

namespace {

void check_box(const std::vector<double>& x, double lo, double hi) {
  if (x.empty()) throw Error(ErrorCode::domain, "test function needs at least one coordinate");
  for (double v : x) {
    if (!(v >= lo && v <= hi)) throw Error(ErrorCode::domain, "input outside the function's domain");
  }
}

}  // namespace

double test_function(TestFunction f, const std::vector<double>& x) {
  switch (f) {
    case TestFunction::branin: {
      if (x.size() != 2) throw Error(ErrorCode::domain, "branin takes two coordinates");
      if (!(x[0] >= -5 && x[0] <= 10 && x[1] >= 0 && x[1] <= 15)) {
        throw Error(ErrorCode::domain, "input outside the branin domain");
      }
      const double b = 5.1 / (4 * M_PI * M_PI);
      const double c = 5 / M_PI;
      const double t = 1 / (8 * M_PI);
      const double u = x[1] - b * x[0] * x[0] + c * x[0] - 6;
      return u * u + 10 * (1 - t) * std::cos(x[0]) + 10;
    }
    case TestFunction::sphere: {
      check_box(x, -5.12, 5.12);
      double s = 0;
      for (double v : x) s += v * v;
      return s;
    }
    case TestFunction::rastrigin: {
      check_box(x, -5.12, 5.12);
      double s = 10.0 * static_cast<double>(x.size());
      for (double v : x) s += v * v - 10 * std::cos(2 * M_PI * v);
      return s;
    }
  }
  throw Error(ErrorCode::domain, "unknown test function");
}

}  // namespace labloom::sim
