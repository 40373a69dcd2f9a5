#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace labloom {

/// The seven node categories a plugin can implement.
enum class ModuleKind {
  initialiser,
  data_processing,
  decision_making,
  environment,
  modeling,
  user_interaction,
  output,
};

std::string_view to_string(ModuleKind kind);
std::optional<ModuleKind> parse_module_kind(std::string_view text);

/// What an artifact or port carries. `any` is only valid on port declarations.
enum class DataKind {
  table,
  vector,
  scalar,
  boolean,
  series,
  candidate_set,
  model_params,
  decision,
  label,
  context,
  document,  // free-form JSON, e.g. a folder-source sidecar
  any,
};

enum class Format { csv, json };

std::string_view to_string(DataKind kind);
std::optional<DataKind> parse_data_kind(std::string_view text);
std::string_view to_string(Format format);
std::optional<Format> parse_format(std::string_view text);

/// Tabular kinds are stored as CSV, everything else as JSON.
Format format_for(DataKind kind);

/// Whether a value of kind `produced` may feed a port declared as `accepted`.
bool kind_accepts(DataKind accepted, DataKind produced);

}  // namespace labloom
