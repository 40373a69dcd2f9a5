#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace labloom {

enum class ErrorCode {
  parse,         // malformed XML
  schema,        // unknown element/attribute, bad parameter, bad answer type
  structural,    // duplicate ids, dangling references
  planning,      // dependency cycle
  validation,    // spec failed validation
  not_found,
  conflict,      // precondition on run phase not met
  stale,         // interaction already resolved
  integrity,     // checkpoint or artifact hash mismatch
  immutability,  // second write to the same artifact slot
  provenance,    // unknown parent artifact
  resolution,    // binding could not be resolved
  numerical,
  exhausted,     // candidate pool exhausted
  domain,        // input outside a function's domain
  plugin,        // plugin or plugin process failure
  io,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed-document error carrying the offending position.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column)
      : Error(ErrorCode::parse, message + " at line " + std::to_string(line) +
                                    ", column " + std::to_string(column)),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace labloom
