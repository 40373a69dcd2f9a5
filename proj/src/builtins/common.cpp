#include "common.hpp"

#include "labloom/builtins.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace labloom::builtin {

ParamSpec num_param(std::string name, std::optional<double> def) {
  ParamSpec p{std::move(name), ParamType::number, {}, std::nullopt, !def.has_value()};
  if (def) p.default_value = *def;
  return p;
}

ParamSpec int_param(std::string name, std::optional<long long> def) {
  ParamSpec p{std::move(name), ParamType::integer, {}, std::nullopt, !def.has_value()};
  if (def) p.default_value = *def;
  return p;
}

ParamSpec text_param(std::string name, std::optional<std::string> def) {
  ParamSpec p{std::move(name), ParamType::text, {}, std::nullopt, !def.has_value()};
  if (def) p.default_value = *def;
  return p;
}

ParamSpec bool_param(std::string name, bool def) {
  return {std::move(name), ParamType::boolean, {}, json(def), false};
}

ParamSpec enum_param(std::string name, std::vector<std::string> values, std::string def) {
  return {std::move(name), ParamType::enumeration, std::move(values), json(def), false};
}

PortSpec in_port(std::string name, DataKind kind, bool optional) { return {std::move(name), kind, optional}; }

PortSpec out_port(std::string name, DataKind kind) { return {std::move(name), kind, false}; }

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::mt19937_64 rng_for(const InvokeRequest& request) { return std::mt19937_64(request.rng_seed()); }

const ArtifactValue& first_input(const InvokeRequest& request, std::string_view port) {
  const auto* v = request.input(port);
  if (!v) throw Error(ErrorCode::domain, "input '" + std::string(port) + "' has no value");
  return *v;
}

Table merged_table(const InvokeRequest& request, std::string_view port) {
  auto it = request.inputs.find(std::string(port));
  if (it == request.inputs.end() || it->second.empty()) {
    throw Error(ErrorCode::domain, "input '" + std::string(port) + "' has no value");
  }
  Table out = it->second.front().table();
  for (std::size_t i = 1; i < it->second.size(); ++i) {
    const Table t = it->second[i].table();
    if (t.columns() != out.columns()) {
      throw Error(ErrorCode::domain, "tables on '" + std::string(port) + "' have different columns");
    }
    for (std::size_t r = 0; r < t.rows(); ++r) {
      std::vector<std::string> row;
      for (std::size_t c = 0; c < t.cols(); ++c) row.push_back(t.cell(r, c));
      out.add_row(std::move(row));
    }
  }
  return out;
}

std::vector<std::vector<double>> numeric_rows(const Table& table, const std::vector<std::string>& columns) {
  for (const auto& c : columns) {
    if (!table.has_column(c)) throw Error(ErrorCode::domain, "table has no column '" + c + "'");
  }
  return table.numeric_rows(columns);
}

ParamSpec simulator_param() { return text_param("simulator", "simulator.json"); }

json simulator_config(const InvokeRequest& request) {
  std::string name = "simulator.json";
  if (request.params.contains("simulator")) name = request.params.at("simulator").get<std::string>();
  const auto path = request.base_dir / name;
  std::ifstream in(path);
  if (!in) return json::object();
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, "simulator config " + path.string() + ": " + e.what());
  }
}

double sim_number(const InvokeRequest& request, const std::string& param, const std::string& key, double fallback) {
  if (request.params.contains(param)) {
    const double v = request.params.at(param).get<double>();
    if (v >= 0.0) return v;
  }
  const json cfg = simulator_config(request);
  if (cfg.contains(key)) return cfg.at(key).get<double>();
  return fallback;
}

}  // namespace labloom::builtin

namespace labloom {

void register_builtins(PluginRegistry& registry) {
  builtin::register_data_plugins(registry);
  builtin::register_ml_plugins(registry);
  builtin::register_sim_plugins(registry);
  builtin::register_ui_plugins(registry);
}

std::shared_ptr<PluginRegistry> builtin_registry() {
  auto registry = std::make_shared<PluginRegistry>();
  register_builtins(*registry);
  return registry;
}

}  // namespace labloom
