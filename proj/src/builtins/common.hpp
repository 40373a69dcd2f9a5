#pragma once

#include "labloom/error.hpp"
#include "labloom/plugin.hpp"

#include <random>
#include <string>
#include <vector>

namespace labloom::builtin {

ParamSpec num_param(std::string name, std::optional<double> def);
ParamSpec int_param(std::string name, std::optional<long long> def);
ParamSpec text_param(std::string name, std::optional<std::string> def);
ParamSpec bool_param(std::string name, bool def);
ParamSpec enum_param(std::string name, std::vector<std::string> values, std::string def);

PortSpec in_port(std::string name, DataKind kind, bool optional = false);
PortSpec out_port(std::string name, DataKind kind);

/// Comma separated list with surrounding blanks removed; empty items dropped.
std::vector<std::string> split_list(const std::string& text);

std::mt19937_64 rng_for(const InvokeRequest& request);

/// First artifact on a port; throws Error(domain) when absent.
const ArtifactValue& first_input(const InvokeRequest& request, std::string_view port);

/// Row-wise union of every table on a port; columns must agree.
Table merged_table(const InvokeRequest& request, std::string_view port);

/// Numeric rows of the named columns.
std::vector<std::vector<double>> numeric_rows(const Table& table, const std::vector<std::string>& columns);

/// Simulator ground truth from `simulator.json` beside the workflow (or the
/// file named by the `simulator` parameter); empty when absent.
json simulator_config(const InvokeRequest& request);

/// Simulator parameter with precedence: explicit non-negative plugin
/// parameter, then simulator config, then the fallback.
double sim_number(const InvokeRequest& request, const std::string& param, const std::string& key, double fallback);

ParamSpec simulator_param();

void register_data_plugins(PluginRegistry& registry);
void register_ml_plugins(PluginRegistry& registry);
void register_sim_plugins(PluginRegistry& registry);
void register_ui_plugins(PluginRegistry& registry);

}  // namespace labloom::builtin
