#include "labloom/kinds.hpp"

#include <array>
#include <utility>

namespace labloom {

namespace {

constexpr std::array<std::pair<ModuleKind, std::string_view>, 7> kModuleNames{{
    {ModuleKind::initialiser, "Initialiser"},
    {ModuleKind::data_processing, "DataProcessing"},
    {ModuleKind::decision_making, "DecisionMaking"},
    {ModuleKind::environment, "Environment"},
    {ModuleKind::modeling, "Modeling"},
    {ModuleKind::user_interaction, "UserInteraction"},
    {ModuleKind::output, "Output"},
}};

constexpr std::array<std::pair<DataKind, std::string_view>, 12> kDataNames{{
    {DataKind::table, "table"},
    {DataKind::vector, "vector"},
    {DataKind::scalar, "scalar"},
    {DataKind::boolean, "boolean"},
    {DataKind::series, "series"},
    {DataKind::candidate_set, "candidate-set"},
    {DataKind::model_params, "model-params"},
    {DataKind::decision, "decision"},
    {DataKind::label, "label"},
    {DataKind::context, "context"},
    {DataKind::document, "document"},
    {DataKind::any, "any"},
}};

}  // namespace

std::string_view to_string(ModuleKind kind) {
  for (const auto& [k, name] : kModuleNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<ModuleKind> parse_module_kind(std::string_view text) {
  for (const auto& [k, name] : kModuleNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

std::string_view to_string(DataKind kind) {
  for (const auto& [k, name] : kDataNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<DataKind> parse_data_kind(std::string_view text) {
  for (const auto& [k, name] : kDataNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Format format) { return format == Format::csv ? "csv" : "json"; }

std::optional<Format> parse_format(std::string_view text) {
  if (text == "csv") return Format::csv;
  if (text == "json") return Format::json;
  return std::nullopt;
}

Format format_for(DataKind kind) {
  switch (kind) {
    case DataKind::table:
    case DataKind::series:
    case DataKind::candidate_set:
      return Format::csv;
    default:
      return Format::json;
  }
}

bool kind_accepts(DataKind accepted, DataKind produced) {
  if (accepted == DataKind::any || produced == DataKind::any) return true;
  if (accepted == produced) return true;
  // Tabular kinds are interchangeable: a candidate set or series is a table.
  return format_for(accepted) == Format::csv && format_for(produced) == Format::csv;
}

}  // namespace labloom
