#include "labloom/iteration.hpp"

#include "labloom/error.hpp"

#include <charconv>

namespace labloom {

std::string IterationVector::render() const {
  if (entries.empty()) return "root";
  std::string out;
  for (const auto& [loop, index] : entries) {
    if (!out.empty()) out.push_back('.');
    out += loop;
    out.push_back('=');
    out += std::to_string(index);
  }
  return out;
}

IterationVector IterationVector::parse(const std::string& text) {
  IterationVector v;
  if (text == "root" || text.empty()) return v;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto dot = text.find('.', start);
    if (dot == std::string::npos) dot = text.size();
    const std::string part = text.substr(start, dot - start);
    const auto eq = part.rfind('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::schema, "malformed iteration vector '" + text + "'");
    }
    std::size_t index = 0;
    const char* first = part.data() + eq + 1;
    const char* last = part.data() + part.size();
    auto [ptr, ec] = std::from_chars(first, last, index);
    if (ec != std::errc() || ptr != last || first == last) {
      throw Error(ErrorCode::schema, "malformed iteration index in '" + text + "'");
    }
    v.entries.emplace_back(part.substr(0, eq), index);
    start = dot + 1;
  }
  return v;
}

}  // namespace labloom
