#pragma once

#include "labloom/plugin.hpp"

namespace labloom {

/// Registers every in-process plugin shipped with the library.
void register_builtins(PluginRegistry& registry);

/// A registry holding the built-in plugins only.
std::shared_ptr<PluginRegistry> builtin_registry();

}  // namespace labloom
