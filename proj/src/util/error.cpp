#include "labloom/error.hpp"

namespace labloom {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse: return "parse";
    case ErrorCode::schema: return "schema";
    case ErrorCode::structural: return "structural";
    case ErrorCode::planning: return "planning";
    case ErrorCode::validation: return "validation";
    case ErrorCode::not_found: return "not-found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::stale: return "stale";
    case ErrorCode::integrity: return "integrity";
    case ErrorCode::immutability: return "immutability";
    case ErrorCode::provenance: return "provenance";
    case ErrorCode::resolution: return "resolution";
    case ErrorCode::numerical: return "numerical";
    case ErrorCode::exhausted: return "exhausted";
    case ErrorCode::domain: return "domain";
    case ErrorCode::plugin: return "plugin";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

}  // namespace labloom
