#pragma once

#include <optional>
#include <string_view>
#include <vector>

namespace labloom::sim {

enum class TestFunction { branin, sphere, rastrigin };

std::optional<TestFunction> parse_test_function(std::string_view name);

/// Standard definitions on their usual domains (branin on [-5,10]x[0,15],
/// sphere and rastrigin on [-5.12,5.12]^d). Throws Error(domain) outside.
double test_function(TestFunction f, const std::vector<double>& x);

}  // namespace labloom::sim
