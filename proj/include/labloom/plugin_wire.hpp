#pragma once

#include "labloom/plugin.hpp"

#include <iosfwd>

namespace labloom::wire {

/// Payloads below this size travel inline; larger stored artifacts by path.
inline constexpr std::size_t kInlineLimit = 64 * 1024;

json descriptor_message(const PluginDescriptor& descriptor);
PluginDescriptor parse_descriptor(const json& message);

json invoke_message(const InvokeRequest& request);
InvokeRequest parse_invoke(const json& message, const PluginDescriptor& descriptor);

json result_message(const InvokeResult& result);
InvokeResult parse_result(const json& message, const MethodSpec& method);

/// Plugin side of the protocol: answers handshake/invoke lines until
/// shutdown or end of input. Returns the process exit code.
int serve(Plugin& plugin, std::istream& in, std::ostream& out);

}  // namespace labloom::wire
