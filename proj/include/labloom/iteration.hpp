#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace labloom {

/// Per-loop pass indices, outermost loop first.
struct IterationVector {
  std::vector<std::pair<std::string, std::size_t>> entries;

  bool empty() const { return entries.empty(); }

  /// Index of the innermost enclosing loop, 0 when outside any loop.
  std::size_t innermost_index() const {
    return entries.empty() ? 0 : entries.back().second;
  }

  /// `loopA=3.loopB=1`, or `root` for the empty vector.
  std::string render() const;

  static IterationVector parse(const std::string& text);

  bool operator==(const IterationVector&) const = default;
  auto operator<=>(const IterationVector&) const = default;
};

}  // namespace labloom
