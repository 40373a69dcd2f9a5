#include "labloom/ml/preprocess.hpp"

#include "labloom/error.hpp"

#include <cmath>
#include <string>

namespace labloom::ml {

std::vector<int> binarize(const std::vector<double>& column, double threshold) {
  if (column.empty()) throw Error(ErrorCode::domain, "binarize needs a non-empty column");
  std::vector<int> out;
  out.reserve(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (!std::isfinite(column[i])) {
      throw Error(ErrorCode::domain, "non-finite value at row " + std::to_string(i));
    }
    out.push_back(column[i] >= threshold ? 1 : 0);
  }
  return out;
}

Standardized standardize(const std::vector<double>& column) {
  if (column.size() < 2) throw Error(ErrorCode::numerical, "standardize needs at least two values");
  Standardized s;
  for (double v : column) s.mean += v;
  s.mean /= static_cast<double>(column.size());
  double ss = 0.0;
  for (double v : column) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(column.size()));
  if (!(s.std > 0.0) || s.std < 1e-300) throw Error(ErrorCode::numerical, "degenerate scale: column is constant");
  s.values.reserve(column.size());
  for (double v : column) s.values.push_back((v - s.mean) / s.std);
  return s;
}

}  // namespace labloom::ml
