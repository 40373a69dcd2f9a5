#pragma once

#include <vector>

namespace labloom::ml {

/// 1 where value >= threshold, else 0. Throws Error(domain) naming the first NaN row.
std::vector<int> binarize(const std::vector<double>& column, double threshold);

struct Standardized {
  std::vector<double> values;
  double mean = 0.0;
  double std = 1.0;  // population standard deviation
};

/// Zero mean, unit population std. Throws Error(numerical) for fewer than
/// two values or a constant column.
Standardized standardize(const std::vector<double>& column);

}  // namespace labloom::ml
